#pragma once

#include <array>
#include <string>

namespace instat::validation {

// The four target distributions of the calibration study.
enum class TargetDist { gaussian, uniform, triangular, exponential };

constexpr std::array<TargetDist, 4> all_distributions() {
    return {TargetDist::gaussian, TargetDist::uniform, TargetDist::triangular,
            TargetDist::exponential};
}

const char* dist_name(TargetDist d);
TargetDist parse_dist(const std::string& name);

// Closed-form inverse CDF; doubles as the sampler (y = F^-1(u)) and as the
// exact-quantile oracle.
double exact_quantile(TargetDist d, double alpha);
double sample_from_uniform(TargetDist d, double u);

} // namespace instat::validation
