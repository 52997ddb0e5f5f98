#include <random>

#include "doctest.h"
#include "raterlab/kernels.hpp"

using namespace raterlab;
using namespace raterlab::kernels;

namespace {

std::vector<std::size_t> sizes() {
    std::vector<std::size_t> s;
    for (std::size_t n = 0; n <= 70; ++n) s.push_back(n);
    for (std::size_t n : {127, 128, 129, 255, 256, 257, 1000, 4099}) s.push_back(n);
    return s;
}

std::vector<std::uint8_t> bits(std::size_t n, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution b(p);
    std::vector<std::uint8_t> v(n);
    for (auto& x : v) x = b(rng);
    return v;
}

// Every compiled-in variant against the scalar reference.
template <class F>
void for_each_variant(F&& f) {
    for (Isa isa : available_isas()) {
        if (isa == Isa::Scalar) continue;
        CAPTURE(isa_name(isa));
        f(*table_for(isa));
    }
}

}  // namespace

TEST_CASE("scalar is always available and listed first") {
    const auto isas = available_isas();
    REQUIRE_FALSE(isas.empty());
    CHECK(isas.front() == Isa::Scalar);
    CHECK(table_for(Isa::Scalar) == &scalar_table());
}

TEST_CASE("count kernels agree with the scalar reference") {
    std::mt19937_64 rng(1);
    const auto& ref = scalar_table();
    for_each_variant([&](const KernelTable& k) {
        for (std::size_t n : sizes()) {
            CAPTURE(n);
            const auto a = bits(n, 0.3, rng), b = bits(n, 0.6, rng);
            CHECK(k.count_nonzero(a.data(), n) == ref.count_nonzero(a.data(), n));
            CHECK(k.count_and(a.data(), b.data(), n) == ref.count_and(a.data(), b.data(), n));
        }
    });
}

TEST_CASE("vote kernels agree with the scalar reference") {
    std::mt19937_64 rng(2);
    const auto& ref = scalar_table();
    for_each_variant([&](const KernelTable& k) {
        for (std::size_t n : sizes()) {
            CAPTURE(n);
            std::vector<std::uint16_t> c1(n, 0), c2(n, 0);
            const std::uint32_t raters = 1 + static_cast<std::uint32_t>(rng() % 9);
            for (std::uint32_t r = 0; r < raters; ++r) {
                const auto m = bits(n, 0.5, rng);
                ref.accumulate_votes(c1.data(), m.data(), n);
                k.accumulate_votes(c2.data(), m.data(), n);
            }
            CHECK(c1 == c2);
            for (std::uint32_t nr : {raters, raters + 1, 1u, 2u}) {
                std::vector<std::uint8_t> o1(n, 9), o2(n, 9);
                ref.threshold_votes(o1.data(), c1.data(), n, nr);
                k.threshold_votes(o2.data(), c1.data(), n, nr);
                CHECK(o1 == o2);
            }
        }
    });
}

TEST_CASE("threshold kernel implements 2 * votes >= raters") {
    const std::vector<std::uint16_t> counts{0, 1, 2, 3, 4};
    std::vector<std::uint8_t> out(5);
    scalar_table().threshold_votes(out.data(), counts.data(), 5, 4);
    CHECK(out == std::vector<std::uint8_t>{0, 0, 1, 1, 1});
    scalar_table().threshold_votes(out.data(), counts.data(), 5, 3);
    CHECK(out == std::vector<std::uint8_t>{0, 0, 1, 1, 1});
    scalar_table().threshold_votes(out.data(), counts.data(), 5, 5);
    CHECK(out == std::vector<std::uint8_t>{0, 0, 0, 1, 1});
}

TEST_CASE("STAPLE accumulation is bit-identical, masked sums agree to rounding") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& ref = scalar_table();
    const RaterLogTerms t{std::log(0.9), std::log1p(-0.9), std::log1p(-0.8), std::log(0.8)};
    for_each_variant([&](const KernelTable& k) {
        for (std::size_t n : sizes()) {
            CAPTURE(n);
            const auto votes = bits(n, 0.4, rng);
            std::vector<double> lp1(n), ln1(n);
            for (std::size_t i = 0; i < n; ++i) {
                lp1[i] = -u(rng);
                ln1[i] = -u(rng);
            }
            auto lp2 = lp1, ln2 = ln1;
            ref.staple_accumulate(lp1.data(), ln1.data(), votes.data(), n, t);
            k.staple_accumulate(lp2.data(), ln2.data(), votes.data(), n, t);
            CHECK(lp1 == lp2);
            CHECK(ln1 == ln2);

            std::vector<double> w(n);
            for (auto& x : w) x = u(rng);
            const auto s1 = ref.staple_masked_sums(w.data(), votes.data(), n);
            const auto s2 = k.staple_masked_sums(w.data(), votes.data(), n);
            CHECK(s2.weight_on_votes1 == doctest::Approx(s1.weight_on_votes1).epsilon(1e-12));
            CHECK(s2.complement_on_votes0 == doctest::Approx(s1.complement_on_votes0).epsilon(1e-12));
        }
    });
}

TEST_CASE("binarize-count and bitwise kernels agree with the scalar reference") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> q(0, 8);
    const auto& ref = scalar_table();
    for_each_variant([&](const KernelTable& k) {
        for (std::size_t n : sizes()) {
            CAPTURE(n);
            // Values on a coarse grid hit the threshold exactly.
            std::vector<float> v(n);
            for (auto& x : v) x = static_cast<float>(q(rng)) / 8.0f;
            std::vector<std::uint16_t> c1(n, 3), c2(n, 3);
            ref.count_at_least(c1.data(), v.data(), n, 0.5f);
            k.count_at_least(c2.data(), v.data(), n, 0.5f);
            CHECK(c1 == c2);

            const auto a = bits(n, 0.5, rng), b = bits(n, 0.5, rng);
            auto o1 = a, o2 = a, x1 = a, x2 = a;
            ref.or_into(o1.data(), b.data(), n);
            k.or_into(o2.data(), b.data(), n);
            ref.and_into(x1.data(), b.data(), n);
            k.and_into(x2.data(), b.data(), n);
            CHECK(o1 == o2);
            CHECK(x1 == x2);
        }
    });
}

TEST_CASE("select switches the active table") {
    const Isa before = active().isa;
    select(Isa::Scalar);
    CHECK(active().isa == Isa::Scalar);
    CHECK(count_nonzero(std::vector<std::uint8_t>{1, 0, 1}) == 2);
    select(before);
    CHECK(active().isa == before);
}
