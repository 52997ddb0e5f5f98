// Compiled with -mavx2; only reached after a runtime CPU feature check.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace raterlab::kernels::avx2 {

namespace {

inline __m256i load32(const std::uint8_t* p) {
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p));
}

inline __m128i load16(const void* p) { return _mm_loadu_si128(reinterpret_cast<const __m128i*>(p)); }

// Four vote bytes widened to a 64-bit lane mask that is all-ones where the vote is 0.
inline __m256d zero_vote_mask(const std::uint8_t* votes) {
    std::int32_t four;
    __builtin_memcpy(&four, votes, sizeof four);
    const __m256i v = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(four));
    return _mm256_castsi256_pd(_mm256_cmpeq_epi64(v, _mm256_setzero_si256()));
}

}  // namespace

std::uint64_t count_nonzero(const std::uint8_t* v, std::size_t n) {
    std::uint64_t c = 0;
    std::size_t i = 0;
    const __m256i zero = _mm256_setzero_si256();
    for (; i + 32 <= n; i += 32) {
        const auto zeros = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(load32(v + i), zero)));
        c += static_cast<std::uint64_t>(__builtin_popcount(~zeros));
    }
    for (; i < n; ++i) c += v[i] != 0;
    return c;
}

std::uint64_t count_and(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
    std::uint64_t c = 0;
    std::size_t i = 0;
    const __m256i zero = _mm256_setzero_si256();
    for (; i + 32 <= n; i += 32) {
        const auto za = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(load32(a + i), zero)));
        const auto zb = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(load32(b + i), zero)));
        c += static_cast<std::uint64_t>(__builtin_popcount(~(za | zb)));
    }
    for (; i < n; ++i) c += (a[i] != 0) & (b[i] != 0);
    return c;
}

void accumulate_votes(std::uint16_t* counts, const std::uint8_t* mask, std::size_t n) {
    std::size_t i = 0;
    const __m256i zero = _mm256_setzero_si256();
    const __m256i one = _mm256_set1_epi16(1);
    for (; i + 16 <= n; i += 16) {
        const __m256i v = _mm256_cvtepu8_epi16(load16(mask + i));
        const __m256i inc = _mm256_andnot_si256(_mm256_cmpeq_epi16(v, zero), one);
        auto* dst = reinterpret_cast<__m256i*>(counts + i);
        _mm256_storeu_si256(dst, _mm256_add_epi16(_mm256_loadu_si256(dst), inc));
    }
    for (; i < n; ++i) counts[i] = static_cast<std::uint16_t>(counts[i] + (mask[i] != 0));
}

void threshold_votes(std::uint8_t* out, const std::uint16_t* counts, std::size_t n,
                     std::uint32_t n_raters) {
    // 2c >= N  <=>  c >= ceil(N / 2)
    const std::uint32_t need = (n_raters + 1) / 2;
    std::size_t i = 0;
    if (need <= 0xFFFF) {
        const __m256i t = _mm256_set1_epi16(static_cast<short>(need));
        const __m256i one = _mm256_set1_epi16(1);
        for (; i + 16 <= n; i += 16) {
            const __m256i c = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(counts + i));
            const __m256i ge = _mm256_and_si256(_mm256_cmpeq_epi16(_mm256_max_epu16(c, t), c), one);
            const __m128i packed =
                _mm_packus_epi16(_mm256_castsi256_si128(ge), _mm256_extracti128_si256(ge, 1));
            _mm_storeu_si128(reinterpret_cast<__m128i*>(out + i), packed);
        }
    }
    for (; i < n; ++i) out[i] = 2u * static_cast<std::uint32_t>(counts[i]) >= n_raters ? 1 : 0;
}

void staple_accumulate(double* log_pos, double* log_neg, const std::uint8_t* votes, std::size_t n,
                       RaterLogTerms t) {
    const __m256d p1 = _mm256_set1_pd(t.pos_if_vote1);
    const __m256d p0 = _mm256_set1_pd(t.pos_if_vote0);
    const __m256d n1 = _mm256_set1_pd(t.neg_if_vote1);
    const __m256d n0 = _mm256_set1_pd(t.neg_if_vote0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d is0 = zero_vote_mask(votes + i);
        const __m256d dp = _mm256_blendv_pd(p1, p0, is0);
        const __m256d dn = _mm256_blendv_pd(n1, n0, is0);
        _mm256_storeu_pd(log_pos + i, _mm256_add_pd(_mm256_loadu_pd(log_pos + i), dp));
        _mm256_storeu_pd(log_neg + i, _mm256_add_pd(_mm256_loadu_pd(log_neg + i), dn));
    }
    for (; i < n; ++i) {
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
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc0 = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d is0 = zero_vote_mask(votes + i);
        const __m256d wv = _mm256_loadu_pd(w + i);
        acc1 = _mm256_add_pd(acc1, _mm256_andnot_pd(is0, wv));
        acc0 = _mm256_add_pd(acc0, _mm256_and_pd(is0, _mm256_sub_pd(one, wv)));
    }
    alignas(32) double l1[4];
    alignas(32) double l0[4];
    _mm256_store_pd(l1, acc1);
    _mm256_store_pd(l0, acc0);
    MaskedSums s{(l1[0] + l1[1]) + (l1[2] + l1[3]), (l0[0] + l0[1]) + (l0[2] + l0[3])};
    for (; i < n; ++i) {
        if (votes[i])
            s.weight_on_votes1 += w[i];
        else
            s.complement_on_votes0 += 1.0 - w[i];
    }
    return s;
}

void count_at_least(std::uint16_t* counts, const float* values, std::size_t n, float threshold) {
    const __m256 t = _mm256_set1_ps(threshold);
    const __m256i one = _mm256_set1_epi16(1);
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        const __m256i m0 = _mm256_castps_si256(_mm256_cmp_ps(_mm256_loadu_ps(values + i), t, _CMP_GE_OQ));
        const __m256i m1 = _mm256_castps_si256(_mm256_cmp_ps(_mm256_loadu_ps(values + i + 8), t, _CMP_GE_OQ));
        const __m256i packed = _mm256_permute4x64_epi64(_mm256_packs_epi32(m0, m1), 0xD8);
        auto* dst = reinterpret_cast<__m256i*>(counts + i);
        _mm256_storeu_si256(dst, _mm256_add_epi16(_mm256_loadu_si256(dst), _mm256_and_si256(packed, one)));
    }
    for (; i < n; ++i) counts[i] = static_cast<std::uint16_t>(counts[i] + (values[i] >= threshold));
}

void or_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32)
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_or_si256(load32(dst + i), load32(src + i)));
    for (; i < n; ++i) dst[i] |= src[i];
}

void and_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32)
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_and_si256(load32(dst + i), load32(src + i)));
    for (; i < n; ++i) dst[i] &= src[i];
}

const KernelTable table{
    Isa::Avx2,        count_nonzero,  count_and, accumulate_votes, threshold_votes,
    staple_accumulate, staple_masked_sums, count_at_least, or_into, and_into,
};

}  // namespace raterlab::kernels::avx2
