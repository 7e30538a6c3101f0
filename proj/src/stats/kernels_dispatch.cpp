#include "instat/stats/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace instat::stats::kernels {

bool avx2_supported() {
#if defined(INSTAT_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

#if !defined(INSTAT_HAVE_AVX2_TU)
const KernelSet& avx2_kernels() {
    throw std::runtime_error("AVX2 kernels were not built for this target");
}
#endif

namespace {

const KernelSet& resolve() {
    const char* pref = std::getenv("INSTAT_KERNELS");
    const std::string mode = pref ? pref : "auto";
    if (mode == "scalar") return scalar_kernels();
    if (mode == "avx2") {
#if defined(INSTAT_HAVE_AVX2_TU)
        if (avx2_supported()) return avx2_kernels();
#endif
        throw std::runtime_error("INSTAT_KERNELS=avx2 but AVX2 is not available");
    }
#if defined(INSTAT_HAVE_AVX2_TU)
    if (avx2_supported()) return avx2_kernels();
#endif
    return scalar_kernels();
}

} // namespace

const KernelSet& active_kernels() {
    static const KernelSet& selected = resolve();
    return selected;
}

std::string active_kernel_name() { return active_kernels().name; }

} // namespace instat::stats::kernels
