#include "instat/stats/kernels.hpp"

// AVX2 variants of the streaming-statistics kernels. Four doubles per lane
// group, scalar remainder tail. Multiplies and adds are kept separate (no
// FMA) and follow the reference operation order exactly, so every lane is
// bit-identical to kernels_scalar.cpp. This TU is the only one compiled with
// -mavx2; callers go through the runtime dispatcher.

#if defined(__AVX2__)

#include <immintrin.h>

namespace instat::stats::kernels {
namespace {

inline __m256d count_to_pd(__m128i c32) {
    return _mm256_cvtepi32_pd(c32); // counts stay below 2^31
}

void moments_update_avx2(const MomentArrays& a, const double* y, std::size_t n) {
    const __m256d k3 = _mm256_set1_pd(3.0);
    const __m256d k2 = _mm256_set1_pd(2.0);
    const __m256d k4 = _mm256_set1_pd(4.0);
    const __m256d k6 = _mm256_set1_pd(6.0);
    const __m128i one32 = _mm_set1_epi32(1);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m128i c0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(a.count + i));
        const __m128i c1 = _mm_add_epi32(c0, one32);
        const __m256d n_old = count_to_pd(c0);
        const __m256d n_new = count_to_pd(c1);

        const __m256d v = _mm256_loadu_pd(y + i);
        const __m256d mean = _mm256_loadu_pd(a.mean + i);
        const __m256d m2 = _mm256_loadu_pd(a.m2 + i);
        const __m256d m3 = _mm256_loadu_pd(a.m3 + i);
        const __m256d m4 = _mm256_loadu_pd(a.m4 + i);

        const __m256d delta = _mm256_sub_pd(v, mean);
        const __m256d delta_n = _mm256_div_pd(delta, n_new);
        const __m256d delta_n2 = _mm256_mul_pd(delta_n, delta_n);
        const __m256d term1 = _mm256_mul_pd(_mm256_mul_pd(delta, delta_n), n_old);

        // poly = (n*n - 3n) + 3
        const __m256d poly = _mm256_add_pd(
            _mm256_sub_pd(_mm256_mul_pd(n_new, n_new), _mm256_mul_pd(k3, n_new)), k3);
        const __m256d m4_new = _mm256_add_pd(
            m4, _mm256_sub_pd(
                    _mm256_add_pd(_mm256_mul_pd(_mm256_mul_pd(term1, delta_n2), poly),
                                  _mm256_mul_pd(_mm256_mul_pd(k6, delta_n2), m2)),
                    _mm256_mul_pd(_mm256_mul_pd(k4, delta_n), m3)));
        const __m256d m3_new = _mm256_add_pd(
            m3, _mm256_sub_pd(
                    _mm256_mul_pd(_mm256_mul_pd(term1, delta_n), _mm256_sub_pd(n_new, k2)),
                    _mm256_mul_pd(_mm256_mul_pd(k3, delta_n), m2)));
        const __m256d m2_new = _mm256_add_pd(m2, term1);
        const __m256d mean_new = _mm256_add_pd(mean, delta_n);

        _mm256_storeu_pd(a.m4 + i, m4_new);
        _mm256_storeu_pd(a.m3 + i, m3_new);
        _mm256_storeu_pd(a.m2 + i, m2_new);
        _mm256_storeu_pd(a.mean + i, mean_new);
        _mm256_storeu_pd(a.min + i, _mm256_min_pd(_mm256_loadu_pd(a.min + i), v));
        _mm256_storeu_pd(a.max + i, _mm256_max_pd(_mm256_loadu_pd(a.max + i), v));
        _mm_storeu_si128(reinterpret_cast<__m128i*>(a.count + i), c1);
    }

    // Scalar tail, same operation order.
    for (; i < n; ++i) {
        const std::uint32_t n0 = a.count[i];
        const double n_old = static_cast<double>(n0);
        const double n_new = static_cast<double>(n0 + 1);
        const double v = y[i];
        const double delta = v - a.mean[i];
        const double delta_n = delta / n_new;
        const double delta_n2 = delta_n * delta_n;
        const double term1 = (delta * delta_n) * n_old;
        a.m4[i] = a.m4[i] + (((term1 * delta_n2) * ((n_new * n_new - 3.0 * n_new) + 3.0) +
                              (6.0 * delta_n2) * a.m2[i]) -
                             (4.0 * delta_n) * a.m3[i]);
        a.m3[i] = a.m3[i] + ((term1 * delta_n) * (n_new - 2.0) - (3.0 * delta_n) * a.m2[i]);
        a.m2[i] = a.m2[i] + term1;
        a.mean[i] = a.mean[i] + delta_n;
        a.min[i] = (a.min[i] < v) ? a.min[i] : v;
        a.max[i] = (a.max[i] > v) ? a.max[i] : v;
        a.count[i] = n0 + 1;
    }
}

void exceed_update_avx2(std::uint32_t* exceed, const double* y, double threshold,
                        std::size_t n) {
    const __m256d thr = _mm256_set1_pd(threshold);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(y + i);
        const int mask = _mm256_movemask_pd(_mm256_cmp_pd(v, thr, _CMP_GT_OQ));
        exceed[i + 0] += (mask >> 0) & 1;
        exceed[i + 1] += (mask >> 1) & 1;
        exceed[i + 2] += (mask >> 2) & 1;
        exceed[i + 3] += (mask >> 3) & 1;
    }
    for (; i < n; ++i) {
        exceed[i] += (y[i] > threshold) ? 1u : 0u;
    }
}

void rm_update_avx2(double* q, const double* y, const double* step,
                    const std::uint32_t* count, double alpha, std::size_t n) {
    const double above = 1.0 - alpha;
    const double below = -alpha;
    const __m256d above_v = _mm256_set1_pd(above);
    const __m256d below_v = _mm256_set1_pd(below);
    const __m128i zero32 = _mm_setzero_si128();

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d qv = _mm256_loadu_pd(q + i);
        const __m256d yv = _mm256_loadu_pd(y + i);
        const __m256d sv = _mm256_loadu_pd(step + i);

        const __m128i c = _mm_loadu_si128(reinterpret_cast<const __m128i*>(count + i));
        const __m256i fresh64 = _mm256_cvtepi32_epi64(_mm_cmpeq_epi32(c, zero32));
        const __m256d fresh = _mm256_castsi256_pd(fresh64);

        const __m256d le = _mm256_cmp_pd(yv, qv, _CMP_LE_OQ);
        const __m256d sel = _mm256_blendv_pd(below_v, above_v, le);
        const __m256d updated = _mm256_sub_pd(qv, _mm256_mul_pd(sv, sel));
        _mm256_storeu_pd(q + i, _mm256_blendv_pd(updated, yv, fresh));
    }
    for (; i < n; ++i) {
        if (count[i] == 0) {
            q[i] = y[i];
        } else {
            const double sel = (y[i] <= q[i]) ? above : below;
            q[i] = q[i] - step[i] * sel;
        }
    }
}

const KernelSet kAvx2 = {&moments_update_avx2, &exceed_update_avx2, &rm_update_avx2, "avx2"};

} // namespace

const KernelSet& avx2_kernels() { return kAvx2; }

} // namespace instat::stats::kernels

#else
#error "kernels_avx2.cpp must be compiled with -mavx2"
#endif
