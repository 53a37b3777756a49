#include <immintrin.h>

#include "ctxsat/kernels.hpp"

namespace ctxsat::kernels {

namespace {

// All-ones lanes where the clause (P, N) is satisfied.
inline __m256i satisfied(__m256i a, std::uint32_t p, std::uint32_t n) {
    const __m256i pv = _mm256_set1_epi32(static_cast<int>(p));
    const __m256i nv = _mm256_set1_epi32(static_cast<int>(n));
    const __m256i hit = _mm256_or_si256(_mm256_and_si256(a, pv), _mm256_andnot_si256(a, nv));
    const __m256i zero = _mm256_cmpeq_epi32(hit, _mm256_setzero_si256());
    return _mm256_xor_si256(zero, _mm256_set1_epi32(-1));
}

}  // namespace

void evaluate_block_avx2(const CompiledModel& m, std::span<const std::uint32_t> codes, double* values,
                         std::uint8_t* feasible) {
    const std::size_t nh = m.hard_pos.size(), ns = m.soft_pos.size();
    const std::size_t full = codes.size() & ~std::size_t{7};
    for (std::size_t i = 0; i < full; i += 8) {
        const __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(codes.data() + i));
        __m256i ok = _mm256_set1_epi32(-1);
        for (std::size_t j = 0; j < nh; ++j) ok = _mm256_and_si256(ok, satisfied(a, m.hard_pos[j], m.hard_neg[j]));
        __m256d lo = _mm256_setzero_pd(), hi = _mm256_setzero_pd();
        for (std::size_t j = 0; j < ns; ++j) {
            const __m256i s = satisfied(a, m.soft_pos[j], m.soft_neg[j]);
            const __m256d w = _mm256_set1_pd(m.soft_w[j]);
            const __m256i s_lo = _mm256_cvtepi32_epi64(_mm256_castsi256_si128(s));
            const __m256i s_hi = _mm256_cvtepi32_epi64(_mm256_extracti128_si256(s, 1));
            lo = _mm256_add_pd(lo, _mm256_and_pd(_mm256_castsi256_pd(s_lo), w));
            hi = _mm256_add_pd(hi, _mm256_and_pd(_mm256_castsi256_pd(s_hi), w));
        }
        _mm256_storeu_pd(values + i, lo);
        _mm256_storeu_pd(values + i + 4, hi);
        const int bits = _mm256_movemask_ps(_mm256_castsi256_ps(ok));
        for (int k = 0; k < 8; ++k) feasible[i + k] = static_cast<std::uint8_t>((bits >> k) & 1);
    }
    if (full < codes.size())
        evaluate_block_scalar(m, codes.subspan(full), values + full, feasible + full);
}

}  // namespace ctxsat::kernels
