#include "kernels_impl.hpp"

namespace raterlab::kernels::scalar {

std::uint64_t count_nonzero(const std::uint8_t* v, std::size_t n) {
    std::uint64_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += v[i] != 0;
    return c;
}

std::uint64_t count_and(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
    std::uint64_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += (a[i] != 0) & (b[i] != 0);
    return c;
}

void accumulate_votes(std::uint16_t* counts, const std::uint8_t* mask, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) counts[i] = static_cast<std::uint16_t>(counts[i] + (mask[i] != 0));
}

void threshold_votes(std::uint8_t* out, const std::uint16_t* counts, std::size_t n,
                     std::uint32_t n_raters) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = 2u * static_cast<std::uint32_t>(counts[i]) >= n_raters ? 1 : 0;
}

void staple_accumulate(double* log_pos, double* log_neg, const std::uint8_t* votes, std::size_t n,
                       RaterLogTerms t) {
    for (std::size_t i = 0; i < n; ++i) {
        if (votes[i]) {
            log_pos[i] += t.pos_if_vote1;
            log_neg[i] += t.neg_if_vote1;
        } else {
            log_pos[i] += t.pos_if_vote0;
            log_neg[i] += t.neg_if_vote0;
        }
    }
}

MaskedSums staple_masked_sums(const double* w, const std::uint8_t* votes, std::size_t n) {
    MaskedSums s;
    for (std::size_t i = 0; i < n; ++i) {
        if (votes[i])
            s.weight_on_votes1 += w[i];
        else
            s.complement_on_votes0 += 1.0 - w[i];
    }
    return s;
}

void count_at_least(std::uint16_t* counts, const float* values, std::size_t n, float threshold) {
    for (std::size_t i = 0; i < n; ++i)
        counts[i] = static_cast<std::uint16_t>(counts[i] + (values[i] >= threshold));
}

void or_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] |= src[i];
}

void and_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] &= src[i];
}

const KernelTable table{
    Isa::Scalar,      count_nonzero,  count_and, accumulate_votes, threshold_votes,
    staple_accumulate, staple_masked_sums, count_at_least, or_into, and_into,
};

}  // namespace raterlab::kernels::scalar
