#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace instat::stats::kernels {

// SoA views over the per-cell accumulator arrays of one (field, timestep)
// slice. All arrays have the same length n.
struct MomentArrays {
    std::uint32_t* count;
    double* mean;
    double* m2;
    double* m3;
    double* m4;
    double* min;
    double* max;
};

// Append y[i] to accumulator i for all i in [0, n). Counts are incremented.
// Accumulators start at count=0, mean=m2=m3=m4=0, min=+inf, max=-inf; the
// update formulas are valid for the 0 -> 1 transition without a special case.
using MomentsUpdateFn = void (*)(const MomentArrays& a, const double* y, std::size_t n);

// exceed[i] += (y[i] > threshold) for all i.
using ExceedUpdateFn = void (*)(std::uint32_t* exceed, const double* y, double threshold,
                                std::size_t n);

// Robbins-Monro update for one quantile order. Where count[i] == 0 the
// estimator is seeded with q[i] = y[i]; otherwise
//   q[i] <- q[i] - step[i] * ((y[i] <= q[i]) ? (1 - alpha) : -alpha).
// step[i] is the precomputed gain C / n^gamma(n) at the cell's current count.
// Counts are not modified here; the moments kernel increments them afterwards.
using RmUpdateFn = void (*)(double* q, const double* y, const double* step,
                            const std::uint32_t* count, double alpha, std::size_t n);

struct KernelSet {
    MomentsUpdateFn moments_update;
    ExceedUpdateFn exceed_update;
    RmUpdateFn rm_update;
    const char* name;
};

// Portable reference implementation.
const KernelSet& scalar_kernels();

// AVX2 implementation; only callable when avx2_supported() is true. Both
// paths use the same per-element operation order (no FMA), so results are
// bit-identical to the scalar kernels.
const KernelSet& avx2_kernels();
bool avx2_supported();

// Runtime-selected kernel set. Honors the INSTAT_KERNELS environment variable
// ("scalar", "avx2", "auto"); selection happens once per process.
const KernelSet& active_kernels();

// Name of the set active_kernels() resolved to ("scalar" / "avx2").
std::string active_kernel_name();

} // namespace instat::stats::kernels
