#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "cfsl/embedding_store.hpp"
#include "cfsl/numerics.hpp"
#include "test_util.hpp"

using namespace cfsl;
using cfsl::testing::TempDir;
using cfsl::testing::code_of;

namespace {

Manifest three_items() {
    Manifest m;
    m.dataset_name = "toy";
    m.class_names = {"a", "b", "c"};
    m.items = {{"x0", 0, 0}, {"x1", 2, 1}, {"x2", 1, 2}};
    return m;
}

} // namespace

TEST_CASE("header layout is bit-exact") {
    const Matrix m = Matrix::from_rows({{1.0, 0.0}});
    const auto bytes = encode_embeddings(m, Dtype::Float32);
    REQUIRE(bytes.size() == kFsebHeaderBytes + 2 * 4);
    CHECK(std::memcmp(bytes.data(), "FSEB", 4) == 0);
    const unsigned char expected_header[] = {'F', 'S', 'E', 'B', 1, 0, 0, 0, 1, 0, 0, 0,
                                             1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0};
    CHECK(std::memcmp(bytes.data(), expected_header, sizeof expected_header) == 0);
    // 1.0f little-endian
    const unsigned char one[] = {0x00, 0x00, 0x80, 0x3f};
    CHECK(std::memcmp(bytes.data() + kFsebHeaderBytes, one, 4) == 0);
}

TEST_CASE("write then read a 2x3 matrix") {
    TempDir dir("fseb");
    const Matrix m = Matrix::from_rows({{0.1, -2.5, 3.0}, {4.25, 1e-3, -7.0}});
    write_embeddings(dir / "m.fseb", m);
    const auto loaded = read_embeddings(dir / "m.fseb", ReadOptions{.renormalize = false});
    CHECK(loaded.matrix == m);
    CHECK(loaded.dtype == Dtype::Float64);
    CHECK(loaded.renormalized_rows == 0);
}

TEST_CASE("round trip is bit-exact for both dtypes on 100 seeded matrices") {
    std::mt19937_64 gen(5150);
    std::uniform_int_distribution<int> dim(1, 12);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix m = cfsl::testing::random_unit_rows(static_cast<std::size_t>(dim(gen)),
                                                         static_cast<std::size_t>(dim(gen)), gen);
        const auto d64 = decode_embeddings(encode_embeddings(m, Dtype::Float64));
        CHECK(d64.matrix == m);
        CHECK(d64.renormalized_rows == 0);

        const auto d32 = decode_embeddings(encode_embeddings(m, Dtype::Float32));
        CHECK(d32.dtype == Dtype::Float32);
        CHECK(d32.renormalized_rows == 0);
        bool same = true;
        for (std::size_t i = 0; i < m.size(); ++i) {
            same = same && d32.matrix.data()[i] == static_cast<double>(static_cast<float>(m.data()[i]));
        }
        CHECK(same);
        // and the widened file re-encodes to identical bytes
        CHECK(encode_embeddings(d32.matrix, Dtype::Float32) == encode_embeddings(m, Dtype::Float32));
    }
}

TEST_CASE("malformed files are rejected") {
    const Matrix m = Matrix::from_rows({{1, 0}, {0, 1}});
    auto bytes = encode_embeddings(m, Dtype::Float64);

    auto bad_magic = bytes;
    std::memcpy(bad_magic.data(), "XXXX", 4);
    CHECK(code_of([&] { decode_embeddings(bad_magic); }) == ErrorCode::BadMagic);

    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK(code_of([&] { decode_embeddings(bad_version); }) == ErrorCode::UnsupportedVersion);

    auto bad_dtype = bytes;
    bad_dtype[8] = 7;
    CHECK(code_of([&] { decode_embeddings(bad_dtype); }) == ErrorCode::UnsupportedDtype);

    auto header_only = bytes;
    header_only.resize(10);
    CHECK(code_of([&] { decode_embeddings(header_only); }) == ErrorCode::TruncatedPayload);
}

TEST_CASE("header claiming 10 rows with 9 in the payload is truncated") {
    TempDir dir("trunc");
    std::mt19937_64 gen(1);
    auto bytes = encode_embeddings(cfsl::testing::random_unit_rows(9, 4, gen), Dtype::Float32);
    bytes[12] = 10;
    {
        std::ofstream os(dir / "t.fseb", std::ios::binary);
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK(code_of([&] { read_embeddings(dir / "t.fseb"); }) == ErrorCode::TruncatedPayload);
}

TEST_CASE("absurd headers hit the size cap before allocation") {
    TempDir dir("cap");
    auto bytes = encode_embeddings(Matrix(1, 1, 1.0), Dtype::Float64);
    // rows = 2^40, dims = 2^30
    std::memset(bytes.data() + 12, 0, 16);
    bytes[12 + 5] = 0x01;
    bytes[20 + 3] = 0x40;
    {
        std::ofstream os(dir / "huge.fseb", std::ios::binary);
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK(code_of([&] { read_embeddings(dir / "huge.fseb"); }) == ErrorCode::SizeOverflow);

    // a configurable cap also applies to honest files
    const auto small = encode_embeddings(Matrix(4, 4, 0.5), Dtype::Float64);
    ReadOptions tight;
    tight.max_payload_bytes = 64;
    CHECK(code_of([&] { decode_embeddings(small, tight); }) == ErrorCode::SizeOverflow);
}

TEST_CASE("rows off the unit sphere are re-normalized and counted") {
    const Matrix m = Matrix::from_rows({{3, 4}, {0.6, 0.8}, {1.00001, 0}});
    const auto loaded = decode_embeddings(encode_embeddings(m, Dtype::Float64));
    CHECK(loaded.renormalized_rows == 1);
    CHECK(loaded.matrix(0, 0) == doctest::Approx(0.6));
    CHECK(loaded.matrix(1, 1) == 0.8);
    CHECK(loaded.matrix(2, 0) == 1.00001);  // within the 1e-4 tolerance: untouched

    const Matrix zero = Matrix::from_rows({{0, 0}});
    CHECK(code_of([&] { decode_embeddings(encode_embeddings(zero, Dtype::Float64)); }) == ErrorCode::ZeroRow);
}

TEST_CASE("non-finite matrices are not written") {
    Matrix m(1, 2);
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK(code_of([&] { encode_embeddings(m, Dtype::Float64); }) == ErrorCode::NonFinite);
}

TEST_CASE("build_onehot examples") {
    const Manifest m = three_items();
    const std::vector<std::string> ids = {"x0", "x1", "x2"};
    CHECK(build_onehot(m, ids) == Matrix::from_rows({{1, 0, 0}, {0, 0, 1}, {0, 1, 0}}));

    const Matrix empty = build_onehot(m, {});
    CHECK(empty.rows() == 0);
    CHECK(empty.cols() == 3);

    const std::vector<std::string> unknown = {"nope"};
    CHECK(code_of([&] { build_onehot(m, unknown); }) == ErrorCode::UnknownItem);
}

TEST_CASE("build_onehot row and column sums") {
    std::mt19937_64 gen(8);
    Manifest m;
    m.dataset_name = "rand";
    m.class_names = {"a", "b", "c", "d", "e"};
    std::uniform_int_distribution<std::size_t> cls(0, 4);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < 60; ++i) {
        m.items.push_back({"i" + std::to_string(i), cls(gen), i});
        ids.push_back("i" + std::to_string(i));
    }
    const Matrix h = build_onehot(m, ids);
    const auto counts = m.class_counts();
    for (std::size_t r = 0; r < h.rows(); ++r) {
        double s = 0;
        for (double x : h.row(r)) s += x;
        CHECK(s == 1.0);
    }
    for (std::size_t c = 0; c < 5; ++c) {
        double s = 0;
        for (std::size_t r = 0; r < h.rows(); ++r) s += h(r, c);
        CHECK(s == static_cast<double>(counts[c]));
    }
}

TEST_CASE("manifest JSON round trip, unknown fields ignored") {
    const Manifest m = three_items();
    const Manifest back = parse_manifest(serialize_manifest(m));
    CHECK(back.class_names == m.class_names);
    CHECK(back.items.size() == 3);
    CHECK(back.items[1].class_index == 2);

    const std::string extra = R"({"dataset_name":"d","class_names":["a"],"future":{"x":1},
        "items":[{"item_id":"i","class_index":0,"row_index":4,"note":"hi"}]})";
    const Manifest e = parse_manifest(extra);
    CHECK(e.items.front().row_index == 4);
}

TEST_CASE("manifest validation") {
    CHECK(code_of([] {
              parse_manifest(R"({"dataset_name":"d","class_names":["a"],
                 "items":[{"item_id":"i","class_index":1,"row_index":0}]})");
          }) == ErrorCode::BadManifest);
    CHECK(code_of([] {
              parse_manifest(R"({"dataset_name":"d","class_names":["a"],
                 "items":[{"item_id":"i","class_index":0,"row_index":0},
                          {"item_id":"j","class_index":0,"row_index":0}]})");
          }) == ErrorCode::BadManifest);
    CHECK(code_of([] { parse_manifest("{not json"); }) == ErrorCode::BadManifest);

    Manifest gap = three_items();
    gap.items.pop_back();  // class "b" now empty
    CHECK_NOTHROW(validate_manifest(gap, false));
    CHECK(code_of([&] { validate_manifest(gap, true); }) == ErrorCode::BadManifest);
}

TEST_CASE("load_feature_set gathers rows by row_index") {
    TempDir dir("fs");
    Manifest m = three_items();
    m.items[0].row_index = 2;
    m.items[2].row_index = 0;
    m.embeddings["clip"] = "clip.fseb";
    const Matrix file = Matrix::from_rows({{1, 0}, {0, 1}, {-1, 0}});
    write_embeddings(dir / "clip.fseb", file, Dtype::Float32);
    save_manifest(dir / "m.json", m);
    const FeatureSet fs = load_feature_set(dir / "m.json");
    CHECK(fs.clip == Matrix::from_rows({{-1, 0}, {0, 1}, {1, 0}}));
    CHECK(fs.blip.cols() == 0);
    CHECK(fs.renormalized_rows == 0);

    m.items[0].row_index = 7;
    save_manifest(dir / "bad.json", m);
    CHECK(code_of([&] { load_feature_set(dir / "bad.json"); }) == ErrorCode::BadManifest);
}
