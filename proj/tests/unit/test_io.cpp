#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "raterlab/csv.hpp"
#include "raterlab/error.hpp"
#include "raterlab/io.hpp"
#include "raterlab/manifest.hpp"
#include "raterlab/preprocess.hpp"
#include "raterlab/rvol.hpp"
#include "test_support.hpp"

using namespace raterlab;
namespace fs = std::filesystem;

namespace {

void write_raw_volume(const fs::path& header, const std::string& dtype, const std::string& kind,
                      const std::string& bytes, std::array<int, 3> dims = {2, 2, 1}) {
    nlohmann::json j{{"format", "RVOL"}, {"version", 1},  {"dims", dims},
                     {"spacing_mm", {1.0, 1.0, 1.0}}, {"dtype", dtype}, {"kind", kind},
                     {"data", header.stem().string() + ".raw"}};
    std::ofstream(header) << j.dump();
    std::ofstream(header.parent_path() / (header.stem().string() + ".raw"), std::ios::binary) << bytes;
}

}  // namespace

TEST_CASE("2x2x1 mask file reads back with two positives") {
    testing::TempDir dir("rvol");
    write_raw_volume(dir / "m.rvol", "u8", "mask", std::string("\x00\x01\x01\x00", 4));
    const auto v = load_volume(dir / "m.rvol");
    CHECK(v.is_mask());
    CHECK(positive_count(v) == 2);
    CHECK(v.value(1, 0, 0) == 1);
    CHECK(v.value(1, 1, 0) == 0);
}

TEST_CASE("RVOL read errors") {
    testing::TempDir dir("rvol-err");
    SUBCASE("size mismatch") {
        write_raw_volume(dir / "m.rvol", "u8", "mask", std::string(5, '\0'));
        CHECK_THROWS_AS(load_volume(dir / "m.rvol"), IoError);
    }
    SUBCASE("non-binary mask") {
        write_raw_volume(dir / "m.rvol", "u8", "mask", std::string("\x00\x03\x01\x00", 4));
        CHECK_THROWS_AS(load_volume(dir / "m.rvol"), IoError);
    }
    SUBCASE("missing header") { CHECK_THROWS_AS(load_volume(dir / "nope.rvol"), IoError); }
    SUBCASE("missing raw") {
        write_raw_volume(dir / "m.rvol", "u8", "mask", std::string(4, '\0'));
        fs::remove(dir / "m.raw");
        CHECK_THROWS_AS(load_volume(dir / "m.rvol"), IoError);
    }
    SUBCASE("u8 with a non-mask kind") {
        write_raw_volume(dir / "m.rvol", "u8", "prob", std::string(4, '\0'));
        CHECK_THROWS_AS(load_volume(dir / "m.rvol"), IoError);
    }
    SUBCASE("unknown dtype") {
        write_raw_volume(dir / "m.rvol", "i16", "mask", std::string(8, '\0'));
        CHECK_THROWS_AS(load_volume(dir / "m.rvol"), IoError);
    }
    SUBCASE("probability out of range") {
        const float vals[4] = {0.f, 0.5f, 2.f, 1.f};
        write_raw_volume(dir / "p.rvol", "f32", "prob", std::string(reinterpret_cast<const char*>(vals), 16));
        CHECK_THROWS(load_volume(dir / "p.rvol"));
    }
}

TEST_CASE("save then load is the identity for every kind") {
    testing::TempDir dir("rvol-rt");
    std::mt19937_64 rng(9);
    const auto m = testing::random_mask({5, 3, 2}, 0.3, rng);
    save_volume(dir / "a/mask.rvol", m);
    CHECK(load_volume(dir / "a/mask.rvol") == m);

    const Geometry g({3, 2, 2}, {0.5, 0.75, 3.0});
    std::vector<float> pv(g.voxel_count()), iv(g.voxel_count());
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (std::size_t i = 0; i < pv.size(); ++i) {
        pv[i] = u(rng);
        iv[i] = 10.f * u(rng) - 5.f;
    }
    const auto p = Volume::probability(g, pv);
    const auto in = Volume::intensity(g, iv);
    save_volume(dir / "p.rvol", p);
    save_volume(dir / "i.rvol", in);
    CHECK(load_volume(dir / "p.rvol") == p);
    const auto back = load_volume(dir / "i.rvol");
    CHECK(back.kind() == VolumeKind::Intensity);
    CHECK(back == in);
    // No temp files left behind.
    for (const auto& e : fs::recursive_directory_iterator(dir.path()))
        CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("raw file is little-endian x-fastest") {
    testing::TempDir dir("rvol-le");
    const auto p = Volume::probability(Geometry({2, 1, 1}, {1, 1, 1}), {0.0f, 1.0f});
    save_volume(dir / "p.rvol", p);
    const auto raw = read_file(dir / "p.raw");
    REQUIRE(raw.size() == 8);
    // 1.0f = 0x3F800000
    CHECK(static_cast<unsigned char>(raw[4]) == 0x00);
    CHECK(static_cast<unsigned char>(raw[7]) == 0x3F);
}

TEST_CASE("header without a data field uses the sibling .raw") {
    testing::TempDir dir("rvol-nodata");
    std::ofstream(dir / "m.rvol") << R"({"dims":[2,1,1],"spacing_mm":[1,1,1],"dtype":"u8","kind":"mask"})";
    std::ofstream(dir / "m.raw", std::ios::binary) << std::string("\x01\x00", 2);
    CHECK(positive_count(load_volume(dir / "m.rvol")) == 1);
}

// ---------------------------------------------------------------------------

namespace {

ManifestSubject subject(const std::string& id, std::vector<ManifestEntry> e) { return {id, std::move(e), {}, {}}; }

}  // namespace

TEST_CASE("manifest invariants") {
    SUBCASE("duplicate subject/rater pair") {
        CHECK_THROWS_AS(DatasetManifest({subject("s1", {{"r1", "c1", "a"}, {"r1", "c1", "b"}})}, "."), Error);
    }
    SUBCASE("rater in two centers") {
        CHECK_THROWS_AS(
            DatasetManifest({subject("s1", {{"r1", "c1", "a"}}), subject("s2", {{"r1", "c2", "b"}})}, "."), Error);
    }
    SUBCASE("subject without entries") { CHECK_THROWS_AS(DatasetManifest({subject("s1", {})}, "."), Error); }
    SUBCASE("duplicate subject") {
        CHECK_THROWS_AS(DatasetManifest({subject("s1", {{"r1", "c1", "a"}}), subject("s1", {{"r2", "c1", "b"}})}, "."),
                        Error);
    }
}

TEST_CASE("manifest queries and round trip") {
    testing::TempDir dir("manifest");
    DatasetManifest m({subject("s2", {{"rb", "cB", "s2/rb.rvol"}, {"ra", "cA", "s2/ra.rvol"}}),
                       subject("s1", {{"ra", "cA", "s1/ra.rvol"}, {"rc", "cA", "s1/rc.rvol"}})},
                      dir.path());
    CHECK(m.rater_ids() == std::vector<std::string>{"ra", "rb", "rc"});
    CHECK(m.center_ids() == std::vector<std::string>{"cA", "cB"});
    CHECK(m.center_of("rc") == "cA");
    CHECK(m.raters_in_center("cA") == std::vector<std::string>{"ra", "rc"});
    CHECK_THROWS(m.subject("s9"));
    m.save(dir / "manifest.json");
    const auto back = DatasetManifest::load(dir / "manifest.json");
    CHECK(back.subjects().size() == 2);
    CHECK(back.resolve("s1/ra.rvol") == dir / "s1/ra.rvol");
    CHECK(back.subject("s2").entries.size() == 2);
}

TEST_CASE("malformed manifest") {
    testing::TempDir dir("manifest-bad");
    std::ofstream(dir / "m.json") << R"({"subjects": [{"subject_id": "s1"}]})";
    CHECK_THROWS_AS(DatasetManifest::load(dir / "m.json"), Error);
    CHECK_THROWS_AS(DatasetManifest::load(dir / "absent.json"), Error);
}

// ---------------------------------------------------------------------------

TEST_CASE("csv quoting round trip") {
    const csv::Row row{"plain", "with,comma", "with \"quote\"", "", "multi\nline"};
    const auto rows = csv::parse(csv::join(row) + "\n" + csv::join({"a", "b", "c", "d", "e"}) + "\r\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == row);
    CHECK(rows[1][4] == "e");
}

TEST_CASE("csv numbers round trip exactly") {
    for (double v : {0.1, -1234.5678, 1e-300, 6.02214076e23, 1.0 / 3.0})
        CHECK(csv::to_double(csv::number(v), "x") == v);
    CHECK(csv::number(std::optional<double>{}) == "");
    CHECK_FALSE(csv::to_optional_double("", "x").has_value());
    CHECK_THROWS_AS(csv::to_double("abc", "x"), Error);
}
