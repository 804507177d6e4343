#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cfsl/matrix.hpp"

namespace cfsl {

// FSEB layout, little-endian, no padding:
//   offset  0  char[4]  magic "FSEB"
//   offset  4  uint32   version (1)
//   offset  8  uint32   dtype tag (1 = float32, 2 = float64)
//   offset 12  uint64   rows
//   offset 20  uint64   dims
//   offset 28  payload  rows * dims values, row-major
inline constexpr char kFsebMagic[4] = {'F', 'S', 'E', 'B'};
inline constexpr std::uint32_t kFsebVersion = 1;
inline constexpr std::size_t kFsebHeaderBytes = 28;

enum class Dtype : std::uint32_t { Float32 = 1, Float64 = 2 };

struct ReadOptions {
    // Rows whose norm differs from 1 by more than this are re-normalized.
    double norm_tolerance = 1e-4;
    // Off for free-parameter matrices such as an adapted cache.
    bool renormalize = true;
    std::uint64_t max_payload_bytes = std::uint64_t{8} << 30;
};

struct LoadedEmbeddings {
    Matrix matrix;
    Dtype dtype = Dtype::Float64;
    std::size_t renormalized_rows = 0;
};

void write_embeddings(const std::filesystem::path& path, const Matrix& m,
                      Dtype dtype = Dtype::Float64);
LoadedEmbeddings read_embeddings(const std::filesystem::path& path, const ReadOptions& options = {});

// In-memory variants; the file functions are thin wrappers over these.
std::vector<unsigned char> encode_embeddings(const Matrix& m, Dtype dtype);
LoadedEmbeddings decode_embeddings(std::span<const unsigned char> bytes,
                                   const ReadOptions& options = {});

struct ManifestItem {
    std::string item_id;
    std::size_t class_index = 0;
    std::size_t row_index = 0;
};

// Class order here is the logit column order for every head.
// `embeddings` maps an encoder role ("clip", "blip") to an FSEB path, relative
// to the manifest's directory; every item's row_index addresses each of them.
struct Manifest {
    std::string dataset_name;
    std::vector<std::string> class_names;
    std::map<std::string, std::string> embeddings;
    std::vector<ManifestItem> items;

    std::size_t num_classes() const noexcept { return class_names.size(); }
    // Throws UnknownItem.
    const ManifestItem& find(const std::string& item_id) const;
    std::vector<std::size_t> class_counts() const;
};

// Checks class indices and row uniqueness; `require_all_classes` additionally
// demands that every class has at least one item (training manifests).
void validate_manifest(const Manifest& manifest, bool require_all_classes);

Manifest parse_manifest(const std::string& json_text);
std::string serialize_manifest(const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

// One row per listed item, one-hot at its class index.
Matrix build_onehot(const Manifest& manifest, std::span<const std::string> item_ids);

// A manifest with its encoder features loaded and row-aligned to `items`.
struct FeatureSet {
    Manifest manifest;
    Matrix clip;  // f(x) rows, one per item
    Matrix blip;  // h(x) rows, one per item; 0 columns when not supplied
    std::size_t renormalized_rows = 0;
};

// Loads every role named in the manifest that is requested. Missing "blip" is
// allowed and yields an empty matrix; missing "clip" throws BadManifest.
FeatureSet load_feature_set(const std::filesystem::path& manifest_path,
                            const ReadOptions& options = {});

} // namespace cfsl
