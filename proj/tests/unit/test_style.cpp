#include <cmath>
#include <random>

#include "doctest.h"
#include "raterlab/error.hpp"
#include "raterlab/morphology.hpp"
#include "raterlab/rvol.hpp"
#include "raterlab/style.hpp"
#include "test_support.hpp"

using namespace raterlab;

namespace {

// A 1-row mask with `n` leading positives, so counts are easy to control.
Volume row_mask(std::size_t len, std::size_t n) {
    std::vector<std::uint8_t> v(len, 0);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1;
    return testing::mask_of({len, 1, 1}, v);
}

std::vector<CountPair> diffs(std::initializer_list<std::pair<int, int>> v) {
    std::vector<CountPair> out;
    for (auto [r, c] : v) out.push_back({static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c)});
    return out;
}

// Boundary = positive voxel with a background (or out-of-grid) face neighbour.
std::vector<std::array<double, 3>> boundary_points(const Volume& m) {
    const auto b = morph::inner_boundary(m);
    const Geometry& g = m.geometry();
    std::vector<std::array<double, 3>> pts;
    for (std::size_t z = 0; z < g.nz(); ++z)
        for (std::size_t y = 0; y < g.ny(); ++y)
            for (std::size_t x = 0; x < g.nx(); ++x)
                if (b.value(x, y, z))
                    pts.push_back({x * g.spacing[0], y * g.spacing[1], z * g.spacing[2]});
    return pts;
}

double directed_mean(const std::vector<std::array<double, 3>>& a, const std::vector<std::array<double, 3>>& b) {
    double sum = 0;
    for (const auto& p : a) {
        double best = INFINITY;
        for (const auto& q : b)
            best = std::min(best, std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]));
        sum += best;
    }
    return sum / a.size();
}

double assd_oracle(const Volume& a, const Volume& b) {
    const auto pa = boundary_points(a), pb = boundary_points(b);
    return 0.5 * (directed_mean(pa, pb) + directed_mean(pb, pa));
}

}  // namespace

TEST_CASE("bias and consistency by hand") {
    auto a = diffs({{105, 100}, {57, 50}});
    CHECK(bias(a) == doctest::Approx(6.0));
    CHECK(consistency(a) == doctest::Approx(1.0));
    auto b = diffs({{15, 10}, {5, 10}});
    CHECK(bias(b) == doctest::Approx(0.0));
    CHECK(consistency(b) == doctest::Approx(5.0));
    auto c = diffs({{13, 10}, {23, 20}, {3, 0}});
    CHECK(consistency(c) == doctest::Approx(0.0));
    CHECK(bias(c) == doctest::Approx(3.0));
}

TEST_CASE("volume forms reduce to counts") {
    std::vector<Volume> r{row_mask(20, 15), row_mask(20, 12)};
    std::vector<Volume> c{row_mask(20, 10), row_mask(20, 5)};
    CHECK(bias(r, c) == doctest::Approx(6.0));
    CHECK(consistency(r, c) == doctest::Approx(1.0));
    CHECK(bias(r, r) == 0.0);
    CHECK(consistency(r, r) == 0.0);
    std::vector<Volume> short_list{row_mask(20, 1)};
    CHECK_THROWS_AS(bias(r, short_list), Error);
    std::vector<Volume> other{row_mask(21, 1), row_mask(21, 1)};
    CHECK_THROWS_AS(bias(r, other), GeometryMismatch);
}

TEST_CASE("relative metrics") {
    auto one = diffs({{110, 100}});
    CHECK(*relative_bias(one).value == doctest::Approx(0.10));
    CHECK(*relative_consistency(one).value == doctest::Approx(0.0));
    auto sym = diffs({{110, 100}, {45, 50}});
    CHECK(*relative_bias(sym).value == doctest::Approx(0.0).epsilon(1e-12));
    auto spread = diffs({{11, 10}, {13, 10}});
    CHECK(*relative_consistency(spread).value == doctest::Approx(0.1));
}

TEST_CASE("relative metrics skip empty consensus images") {
    auto some = diffs({{110, 100}, {4, 0}});
    const auto rb = relative_bias(some);
    CHECK(rb.skipped == 1);
    CHECK(*rb.value == doctest::Approx(0.10));
    auto none = diffs({{3, 0}, {0, 0}});
    const auto u = relative_bias(none);
    CHECK_FALSE(u.value.has_value());
    CHECK(u.skipped == 2);
    CHECK_FALSE(relative_consistency(none).value.has_value());
}

TEST_CASE("bias is linear and consistency shift invariant") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> d(0, 200);
    for (int t = 0; t < 30; ++t) {
        std::vector<CountPair> v, shifted;
        const int k = d(rng) % 20;
        for (int i = 0; i < 6; ++i) {
            CountPair p{static_cast<std::uint64_t>(d(rng)), static_cast<std::uint64_t>(d(rng))};
            v.push_back(p);
            shifted.push_back({p.rater + k, p.consensus});
        }
        CHECK(bias(shifted) == doctest::Approx(bias(v) + k));
        CHECK(consistency(shifted) == doctest::Approx(consistency(v)));
        CHECK(consistency(v) >= 0.0);
    }
}

TEST_CASE("assd examples") {
    const std::array<std::size_t, 3> dims{8, 3, 1};
    const auto a = testing::mask_with(dims, {{1, 1, 0}});
    const auto b = testing::mask_with(dims, {{4, 1, 0}});
    CHECK(*assd(a, b) == doctest::Approx(3.0));
    CHECK(*assd(a, a) == 0.0);
    CHECK_FALSE(assd(a, Volume::zeros_mask(a.geometry())).has_value());

    // Square grown by one voxel in +x: a->b is 0, b->a is 2/6.
    const std::array<std::size_t, 3> d2{6, 5, 1};
    const auto sq = testing::mask_with(d2, {{1, 1, 0}, {2, 1, 0}, {1, 2, 0}, {2, 2, 0}});
    const auto grown = testing::mask_with(d2, {{1, 1, 0}, {2, 1, 0}, {3, 1, 0}, {1, 2, 0}, {2, 2, 0}, {3, 2, 0}});
    CHECK(*assd(sq, grown) == doctest::Approx(1.0 / 6.0));
    CHECK(*assd(sq, grown) == doctest::Approx(assd_oracle(sq, grown)));
}

TEST_CASE("assd methods agree with the brute-force oracle") {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 15; ++t) {
        const std::array<double, 3> sp{1.0, 0.7, 2.5};
        const auto ra = testing::random_mask({9, 7, 4}, 0.3, rng);
        const auto rb = testing::random_mask({9, 7, 4}, 0.2, rng);
        const auto av = ra.mask_values(), bv = rb.mask_values();
        const auto a = testing::mask_of({9, 7, 4}, {av.begin(), av.end()}, sp);
        const auto b = testing::mask_of({9, 7, 4}, {bv.begin(), bv.end()}, sp);
        if (!assd(a, b)) continue;
        const double ref = assd_oracle(a, b);
        CHECK(*assd(a, b, AssdMethod::BruteForce) == doctest::Approx(ref).epsilon(1e-9));
        CHECK(*assd(a, b, AssdMethod::DistanceTransform) == doctest::Approx(ref).epsilon(1e-9));
        CHECK(*assd(a, b) == doctest::Approx(*assd(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("consensus scope parsing") {
    CHECK(ConsensusScope::parse("global").kind == ConsensusScope::Kind::Global);
    const auto c = ConsensusScope::parse("center:A");
    CHECK(c.kind == ConsensusScope::Kind::Center);
    CHECK(c.center_id == "A");
    CHECK(c.describe() == "center:A");
    const auto r = ConsensusScope::parse("raters:r1,r3");
    CHECK(r.raters == std::vector<std::string>{"r1", "r3"});
    CHECK(r.filter()("r3", "X"));
    CHECK_FALSE(r.filter()("r2", "X"));
    CHECK(c.filter()("anyone", "A"));
    CHECK_FALSE(c.filter()("anyone", "B"));
    CHECK_THROWS_AS(ConsensusScope::parse("center:"), Error);
    CHECK_THROWS_AS(ConsensusScope::parse("everyone"), Error);
}

namespace {

DatasetManifest write_manifest(const testing::TempDir& dir,
                               const std::vector<std::pair<std::string, std::string>>& raters,
                               const std::vector<std::vector<std::size_t>>& counts_per_subject) {
    std::vector<ManifestSubject> subjects;
    for (std::size_t s = 0; s < counts_per_subject.size(); ++s) {
        ManifestSubject sub{"s" + std::to_string(s), {}, std::nullopt, std::nullopt};
        for (std::size_t j = 0; j < raters.size(); ++j) {
            const std::string rel = sub.subject_id + "_" + raters[j].first + ".rvol";
            save_volume(dir / rel, row_mask(32, counts_per_subject[s][j]));
            sub.entries.push_back({raters[j].first, raters[j].second, rel});
        }
        subjects.push_back(std::move(sub));
    }
    return DatasetManifest(std::move(subjects), dir.path());
}

}  // namespace

TEST_CASE("style table of one rater is zero") {
    testing::TempDir dir("style1");
    const auto m = write_manifest(dir, {{"r1", "A"}}, {{5}, {9}});
    const auto t = style_table(m, FusionMethod::Majority, ConsensusScope::custom({"r1"}));
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].bias == 0.0);
    CHECK(t.rows[0].consistency == 0.0);
    CHECK(t.rows[0].n_images == 2);
}

TEST_CASE("style table signs follow over- and under-segmentation") {
    testing::TempDir dir("style3");
    // Row masks nest, so the majority of three is the middle count.
    const auto m = write_manifest(dir, {{"big", "A"}, {"mid", "A"}, {"small", "B"}},
                                  {{20, 10, 4}, {22, 12, 7}, {18, 11, 5}});
    const auto t = style_table(m, FusionMethod::Majority, ConsensusScope::global());
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].rater_id == "big");
    CHECK(t.rows[0].bias == doctest::Approx((10 + 10 + 7) / 3.0));
    CHECK(t.rows[1].bias == 0.0);
    CHECK(t.rows[2].bias == doctest::Approx(-(6 + 5 + 6) / 3.0));
    CHECK(t.rows[2].center_id == "B");

    const auto sw = style_table(m, FusionMethod::Majority, ConsensusScope::global(), {.slice_wise = true});
    CHECK(sw.rows[0].n_images == 3);

    const auto centre = style_table(m, FusionMethod::Majority, ConsensusScope::center("A"));
    REQUIRE(centre.rows.size() == 2);
    // Two raters: the tie rule makes the union the consensus.
    CHECK(centre.rows[0].bias == 0.0);

    const auto back = parse_style_csv(style_table_csv(t));
    REQUIRE(back.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.rows[i].rater_id == t.rows[i].rater_id);
        CHECK(back.rows[i].bias == t.rows[i].bias);
        CHECK(back.rows[i].consistency == t.rows[i].consistency);
        CHECK(back.rows[i].relative_bias == t.rows[i].relative_bias);
    }
}

TEST_CASE("style table is invariant to rater order in the manifest") {
    testing::TempDir d1("styleA"), d2("styleB");
    const auto m1 = write_manifest(d1, {{"r1", "A"}, {"r2", "B"}, {"r3", "B"}}, {{3, 8, 6}, {9, 2, 4}});
    const auto m2 = write_manifest(d2, {{"r3", "B"}, {"r1", "A"}, {"r2", "B"}}, {{6, 3, 8}, {4, 9, 2}});
    const auto t1 = style_table(m1, FusionMethod::Majority, ConsensusScope::global());
    const auto t2 = style_table(m2, FusionMethod::Majority, ConsensusScope::global());
    CHECK(style_table_csv(t1) == style_table_csv(t2));
}
