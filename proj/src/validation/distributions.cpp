#include "instat/validation/distributions.hpp"

#include <cmath>

#include "instat/error.hpp"
#include "instat/normal.hpp"

namespace instat::validation {

const char* dist_name(TargetDist d) {
    switch (d) {
    case TargetDist::gaussian: return "gaussian";
    case TargetDist::uniform: return "uniform";
    case TargetDist::triangular: return "triangular";
    case TargetDist::exponential: return "exponential";
    }
    return "?";
}

TargetDist parse_dist(const std::string& name) {
    for (TargetDist d : all_distributions()) {
        if (name == dist_name(d)) return d;
    }
    throw ConfigError("unknown distribution: " + name +
                      " (expected gaussian|uniform|triangular|exponential)");
}

double exact_quantile(TargetDist d, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("quantile order must be in (0,1)");
    switch (d) {
    case TargetDist::gaussian:
        return inverse_normal_cdf(alpha);
    case TargetDist::uniform:
        return alpha;
    case TargetDist::triangular:
        // T(0, 1/2, 1): F(c) = 1/2 at the mode.
        return alpha < 0.5 ? std::sqrt(alpha / 2.0) : 1.0 - std::sqrt((1.0 - alpha) / 2.0);
    case TargetDist::exponential:
        return -std::log1p(-alpha);
    }
    throw ConfigError("unknown distribution");
}

double sample_from_uniform(TargetDist d, double u) { return exact_quantile(d, u); }

} // namespace instat::validation
