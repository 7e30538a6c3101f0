#include "instat/launcher/params.hpp"

#include <cstdio>
#include <sstream>

#include "instat/error.hpp"
#include "instat/rng.hpp"

namespace instat::launcher {

bool ParameterSet::within_bounds() const {
    const auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    return in(conc_upper, kConcWidthLo, kConcWidthHi) &&
           in(conc_lower, kConcWidthLo, kConcWidthHi) &&
           in(width_upper, kConcWidthLo, kConcWidthHi) &&
           in(width_lower, kConcWidthLo, kConcWidthHi) &&
           in(dur_upper, kDurationLo, kDurationHi) && in(dur_lower, kDurationLo, kDurationHi);
}

std::string ParameterSet::to_arg() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", conc_upper,
                  conc_lower, width_upper, width_lower, dur_upper, dur_lower);
    return buf;
}

ParameterSet ParameterSet::from_arg(const std::string& arg) {
    ParameterSet p;
    double* slots[6] = {&p.conc_upper, &p.conc_lower, &p.width_upper,
                        &p.width_lower, &p.dur_upper, &p.dur_lower};
    std::istringstream ss(arg);
    std::string token;
    for (int i = 0; i < 6; ++i) {
        if (!std::getline(ss, token, ',')) throw ConfigError("expected 6 parameters: " + arg);
        *slots[i] = std::stod(token);
    }
    if (std::getline(ss, token, ',')) throw ConfigError("expected 6 parameters: " + arg);
    return p;
}

ParameterSet parameter_set_for(std::uint64_t seed, std::uint32_t simulation_id) {
    const CounterRng rng(seed, simulation_id);
    const auto cw = [&](std::uint64_t i) {
        return kConcWidthLo + (kConcWidthHi - kConcWidthLo) * rng.uniform(i);
    };
    const auto dur = [&](std::uint64_t i) {
        return kDurationLo + (kDurationHi - kDurationLo) * rng.uniform(i);
    };
    ParameterSet p;
    p.conc_upper = cw(0);
    p.conc_lower = cw(1);
    p.width_upper = cw(2);
    p.width_lower = cw(3);
    p.dur_upper = dur(4);
    p.dur_lower = dur(5);
    return p;
}

std::vector<ParameterSet> generate_parameter_sets(std::uint32_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("need at least one parameter set");
    std::vector<ParameterSet> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(parameter_set_for(seed, i));
    return out;
}

} // namespace instat::launcher
