#pragma once

#include <cstdint>
#include <vector>

#include "instat/error.hpp"

namespace instat::stats {

// Step-exponent schedule for the Robbins-Monro recursion. The linear profile
// ramps gamma from 0.1 at the first observation to 1.0 at the declared total
// sample size; past the declared size it stays clamped at 1.0 so late
// (restart-added) samples keep shrinking the step.
double gamma_linear(std::uint64_t n, std::uint64_t declared_n);

struct GammaSchedule {
    enum class Kind { constant, linear };

    Kind kind = Kind::linear;
    double constant_gamma = 1.0;

    static GammaSchedule linear() { return {Kind::linear, 1.0}; }
    static GammaSchedule constant(double gamma) {
        if (!(gamma > 0.0 && gamma <= 1.0))
            throw ConfigError("constant gamma must be in (0, 1]");
        return {Kind::constant, gamma};
    }

    double exponent(std::uint64_t n, std::uint64_t declared_n) const {
        return kind == Kind::constant ? constant_gamma : gamma_linear(n, declared_n);
    }

    bool operator==(const GammaSchedule&) const = default;
};

// Per-study statistics configuration: which quantile orders and exceedance
// thresholds every (cell, timestep) tracks, plus the RM gain settings.
struct StatisticsConfig {
    std::vector<double> quantile_orders;
    std::vector<double> thresholds;
    double gain_c = 1.0;
    GammaSchedule schedule = GammaSchedule::linear();
    std::uint64_t declared_n = 2;

    void validate() const;

    bool operator==(const StatisticsConfig&) const = default;
};

} // namespace instat::stats
