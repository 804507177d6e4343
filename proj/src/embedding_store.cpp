#include "cfsl/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include <json.hpp>

#include "cfsl/numerics.hpp"

namespace cfsl {

namespace {

template <typename U>
void put_le(std::vector<unsigned char>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<unsigned char>(value >> (8 * i)));
    }
}

template <typename U>
U get_le(std::span<const unsigned char> bytes, std::size_t offset) {
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        value |= static_cast<U>(bytes[offset + i]) << (8 * i);
    }
    return value;
}

std::size_t dtype_size(Dtype dtype) { return dtype == Dtype::Float32 ? 4 : 8; }

} // namespace

std::vector<unsigned char> encode_embeddings(const Matrix& m, Dtype dtype) {
    if (!m.all_finite()) {
        throw Error(ErrorCode::NonFinite, "refusing to write non-finite embeddings");
    }
    if (dtype != Dtype::Float32 && dtype != Dtype::Float64) {
        throw Error(ErrorCode::UnsupportedDtype, "unknown dtype");
    }
    std::vector<unsigned char> out;
    out.reserve(kFsebHeaderBytes + m.size() * dtype_size(dtype));
    out.insert(out.end(), std::begin(kFsebMagic), std::end(kFsebMagic));
    put_le<std::uint32_t>(out, kFsebVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dtype));
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint64_t>(out, m.cols());
    for (double v : m.data()) {
        if (dtype == Dtype::Float32) {
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        } else {
            put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    return out;
}

namespace {

struct FsebHeader {
    Dtype dtype;
    std::uint64_t rows;
    std::uint64_t dims;
    std::uint64_t payload_bytes;
};

FsebHeader parse_header(std::span<const unsigned char> bytes, const ReadOptions& options) {
    if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, std::begin(kFsebMagic))) {
        throw Error(ErrorCode::BadMagic, "not an FSEB file");
    }
    if (bytes.size() < kFsebHeaderBytes) {
        throw Error(ErrorCode::TruncatedPayload, "header is incomplete");
    }
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kFsebVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
    }
    const auto tag = get_le<std::uint32_t>(bytes, 8);
    if (tag != 1 && tag != 2) {
        throw Error(ErrorCode::UnsupportedDtype, "dtype tag " + std::to_string(tag));
    }
    FsebHeader h{static_cast<Dtype>(tag), get_le<std::uint64_t>(bytes, 12),
                 get_le<std::uint64_t>(bytes, 20), 0};
    const std::uint64_t elem = dtype_size(h.dtype);
    if (h.dims != 0 && h.rows > options.max_payload_bytes / elem / h.dims) {
        throw Error(ErrorCode::SizeOverflow, std::to_string(h.rows) + " x " +
                                                 std::to_string(h.dims) + " exceeds the payload cap");
    }
    h.payload_bytes = h.rows * h.dims * elem;
    return h;
}

} // namespace

LoadedEmbeddings decode_embeddings(std::span<const unsigned char> bytes, const ReadOptions& options) {
    const FsebHeader h = parse_header(bytes, options);
    const auto dtype = h.dtype;
    const auto rows = h.rows;
    const auto dims = h.dims;
    const std::uint64_t elem = dtype_size(dtype);
    const std::uint64_t payload = h.payload_bytes;
    if (bytes.size() - kFsebHeaderBytes < payload) {
        throw Error(ErrorCode::TruncatedPayload,
                    "expected " + std::to_string(payload) + " payload bytes, found " +
                        std::to_string(bytes.size() - kFsebHeaderBytes));
    }

    LoadedEmbeddings loaded;
    loaded.dtype = dtype;
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(dims));
    auto data = m.data();
    std::size_t offset = kFsebHeaderBytes;
    for (std::size_t i = 0; i < data.size(); ++i, offset += elem) {
        if (dtype == Dtype::Float32) {
            data[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset)));
        } else {
            data[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
        }
    }
    if (!m.all_finite()) {
        throw Error(ErrorCode::NonFinite, "payload contains non-finite values");
    }
    if (options.renormalize) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double n = l2_norm(m.row(r));
            if (n < 1e-300) {
                throw Error(ErrorCode::ZeroRow, "row " + std::to_string(r) + " has zero norm");
            }
            if (std::abs(n - 1.0) > options.norm_tolerance) {
                for (double& x : m.row(r)) {
                    x /= n;
                }
                ++loaded.renormalized_rows;
            }
        }
    }
    loaded.matrix = std::move(m);
    return loaded;
}

void write_embeddings(const std::filesystem::path& path, const Matrix& m, Dtype dtype) {
    const auto bytes = encode_embeddings(m, dtype);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
        throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
    }
}

LoadedEmbeddings read_embeddings(const std::filesystem::path& path, const ReadOptions& options) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    // Header checks (including the size cap) run before the payload is read.
    std::vector<unsigned char> bytes(kFsebHeaderBytes);
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    bytes.resize(static_cast<std::size_t>(is.gcount()));
    const FsebHeader h = parse_header(bytes, options);
    bytes.reserve(kFsebHeaderBytes + h.payload_bytes);
    bytes.insert(bytes.end(), std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    return decode_embeddings(bytes, options);
}

const ManifestItem& Manifest::find(const std::string& item_id) const {
    auto it = std::find_if(items.begin(), items.end(),
                           [&](const ManifestItem& item) { return item.item_id == item_id; });
    if (it == items.end()) {
        throw Error(ErrorCode::UnknownItem, "item '" + item_id + "' is not in the manifest");
    }
    return *it;
}

std::vector<std::size_t> Manifest::class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const auto& item : items) {
        if (item.class_index < counts.size()) {
            ++counts[item.class_index];
        }
    }
    return counts;
}

void validate_manifest(const Manifest& manifest, bool require_all_classes) {
    std::set<std::size_t> rows;
    std::set<std::string> ids;
    for (const auto& item : manifest.items) {
        if (item.class_index >= manifest.num_classes()) {
            throw Error(ErrorCode::BadManifest, "item '" + item.item_id + "' has class index " +
                                                    std::to_string(item.class_index));
        }
        if (!rows.insert(item.row_index).second) {
            throw Error(ErrorCode::BadManifest, "row index " + std::to_string(item.row_index) +
                                                    " used twice");
        }
        if (!ids.insert(item.item_id).second) {
            throw Error(ErrorCode::BadManifest, "item id '" + item.item_id + "' used twice");
        }
    }
    if (require_all_classes) {
        const auto counts = manifest.class_counts();
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0) {
                throw Error(ErrorCode::BadManifest,
                            "class '" + manifest.class_names[c] + "' has no items");
            }
        }
    }
}

Manifest parse_manifest(const std::string& json_text) {
    using nlohmann::json;
    Manifest m;
    try {
        const json j = json::parse(json_text);
        m.dataset_name = j.at("dataset_name").get<std::string>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        if (j.contains("embeddings")) {
            m.embeddings = j.at("embeddings").get<std::map<std::string, std::string>>();
        }
        for (const auto& item : j.at("items")) {
            m.items.push_back({item.at("item_id").get<std::string>(),
                               item.at("class_index").get<std::size_t>(),
                               item.at("row_index").get<std::size_t>()});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadManifest, e.what());
    }
    validate_manifest(m, false);
    return m;
}

std::string serialize_manifest(const Manifest& manifest) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["dataset_name"] = manifest.dataset_name;
    j["class_names"] = manifest.class_names;
    j["embeddings"] = manifest.embeddings;
    ordered_json items = ordered_json::array();
    for (const auto& item : manifest.items) {
        items.push_back({{"item_id", item.item_id},
                         {"class_index", item.class_index},
                         {"row_index", item.row_index}});
    }
    j["items"] = std::move(items);
    return j.dump(1) + "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    const std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    return parse_manifest(text);
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    }
    os << serialize_manifest(manifest);
}

Matrix build_onehot(const Manifest& manifest, std::span<const std::string> item_ids) {
    Matrix out(item_ids.size(), manifest.num_classes());
    for (std::size_t i = 0; i < item_ids.size(); ++i) {
        const auto& item = manifest.find(item_ids[i]);
        if (item.class_index >= manifest.num_classes()) {
            throw Error(ErrorCode::BadManifest, "class index out of range");
        }
        out(i, item.class_index) = 1.0;
    }
    return out;
}

namespace {

Matrix gather_rows(const Manifest& manifest, const Matrix& file, const std::string& role) {
    Matrix out(manifest.items.size(), file.cols());
    for (std::size_t i = 0; i < manifest.items.size(); ++i) {
        const std::size_t r = manifest.items[i].row_index;
        if (r >= file.rows()) {
            throw Error(ErrorCode::BadManifest, "row index " + std::to_string(r) + " beyond the " +
                                                    std::to_string(file.rows()) + "-row " + role +
                                                    " file");
        }
        std::copy_n(file.row(r).begin(), file.cols(), out.row(i).begin());
    }
    return out;
}

} // namespace

FeatureSet load_feature_set(const std::filesystem::path& manifest_path, const ReadOptions& options) {
    FeatureSet fs;
    fs.manifest = load_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    auto resolve = [&](const std::string& rel) {
        const std::filesystem::path p(rel);
        return p.is_absolute() ? p : base / p;
    };
    auto clip = fs.manifest.embeddings.find("clip");
    if (clip == fs.manifest.embeddings.end()) {
        throw Error(ErrorCode::BadManifest, manifest_path.string() + " names no clip embeddings");
    }
    auto loaded = read_embeddings(resolve(clip->second), options);
    fs.renormalized_rows += loaded.renormalized_rows;
    fs.clip = gather_rows(fs.manifest, loaded.matrix, "clip");
    if (auto blip = fs.manifest.embeddings.find("blip"); blip != fs.manifest.embeddings.end()) {
        auto b = read_embeddings(resolve(blip->second), options);
        fs.renormalized_rows += b.renormalized_rows;
        fs.blip = gather_rows(fs.manifest, b.matrix, "blip");
    } else {
        fs.blip = Matrix(fs.manifest.items.size(), 0);
    }
    return fs;
}

} // namespace cfsl
