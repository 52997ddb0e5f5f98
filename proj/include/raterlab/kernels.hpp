#pragma once

// Voxelwise inner loops shared by fusion, metrics, morphology and the
// uncertainty harness. Each kernel has a scalar reference implementation and
// optional SIMD variants; the variant is picked once at runtime from CPU
// features (override with RATERLAB_ISA=scalar|avx2).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace raterlab::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Log-likelihood increments contributed by one rater in the STAPLE E-step.
struct RaterLogTerms {
    double pos_if_vote1;  // log p
    double pos_if_vote0;  // log(1 - p)
    double neg_if_vote1;  // log(1 - q)
    double neg_if_vote0;  // log q
};

struct MaskedSums {
    double weight_on_votes1 = 0.0;        // sum of w where vote == 1
    double complement_on_votes0 = 0.0;    // sum of (1 - w) where vote == 0
};

struct KernelTable {
    Isa isa;

    std::uint64_t (*count_nonzero)(const std::uint8_t* v, std::size_t n);
    std::uint64_t (*count_and)(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);
    void (*accumulate_votes)(std::uint16_t* counts, const std::uint8_t* mask, std::size_t n);
    // out[i] = 2 * counts[i] >= n_raters
    void (*threshold_votes)(std::uint8_t* out, const std::uint16_t* counts, std::size_t n,
                            std::uint32_t n_raters);
    void (*staple_accumulate)(double* log_pos, double* log_neg, const std::uint8_t* votes,
                              std::size_t n, RaterLogTerms terms);
    MaskedSums (*staple_masked_sums)(const double* w, const std::uint8_t* votes, std::size_t n);
    // counts[i] += (values[i] >= threshold)
    void (*count_at_least)(std::uint16_t* counts, const float* values, std::size_t n,
                           float threshold);
    void (*or_into)(std::uint8_t* dst, const std::uint8_t* src, std::size_t n);
    void (*and_into)(std::uint8_t* dst, const std::uint8_t* src, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* table_for(Isa isa);
/// Variants usable on this machine, scalar first.
std::vector<Isa> available_isas();

/// The table selected for this process.
const KernelTable& active();
/// Forces a variant for the rest of the process; throws if unavailable.
void select(Isa isa);

// Span conveniences over the active table.
std::uint64_t count_nonzero(std::span<const std::uint8_t> v);
std::uint64_t count_and(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace raterlab::kernels
