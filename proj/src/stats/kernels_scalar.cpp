#include "instat/stats/kernels.hpp"

// Reference kernels. The exact order of operations here is the contract:
// the AVX2 variants replicate it lane by lane and the equivalence tests
// assert bitwise equality, so any change must be mirrored there.

namespace instat::stats::kernels {
namespace {

void moments_update_scalar(const MomentArrays& a, const double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t n0 = a.count[i];
        const double n_old = static_cast<double>(n0);
        const double n_new = static_cast<double>(n0 + 1);
        const double v = y[i];

        const double delta = v - a.mean[i];
        const double delta_n = delta / n_new;
        const double delta_n2 = delta_n * delta_n;
        const double term1 = (delta * delta_n) * n_old;

        // Higher moments first: each update consumes the previous-order sums.
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

void exceed_update_scalar(std::uint32_t* exceed, const double* y, double threshold,
                          std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        exceed[i] += (y[i] > threshold) ? 1u : 0u;
    }
}

void rm_update_scalar(double* q, const double* y, const double* step,
                      const std::uint32_t* count, double alpha, std::size_t n) {
    const double above = 1.0 - alpha; // applied when y <= q (estimate moves down)
    const double below = -alpha;      // applied when y >  q (estimate moves up)
    for (std::size_t i = 0; i < n; ++i) {
        if (count[i] == 0) {
            q[i] = y[i];
        } else {
            const double sel = (y[i] <= q[i]) ? above : below;
            q[i] = q[i] - step[i] * sel;
        }
    }
}

const KernelSet kScalar = {&moments_update_scalar, &exceed_update_scalar, &rm_update_scalar,
                           "scalar"};

} // namespace

const KernelSet& scalar_kernels() { return kScalar; }

} // namespace instat::stats::kernels
