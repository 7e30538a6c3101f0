#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace instat::launcher {

// The six uncertain inputs of one ensemble member: dye concentration,
// injection width and injection duration for the upper and lower inlets.
// Concentrations and widths are uniform on [0.1, 0.9], durations uniform on
// [0.002, 0.1] (simulated-time units).
struct ParameterSet {
    double conc_upper = 0.0;
    double conc_lower = 0.0;
    double width_upper = 0.0;
    double width_lower = 0.0;
    double dur_upper = 0.0;
    double dur_lower = 0.0;

    bool within_bounds() const;

    // Round-trippable command-line form (full precision).
    std::string to_arg() const;
    static ParameterSet from_arg(const std::string& arg);

    bool operator==(const ParameterSet&) const = default;
};

inline constexpr double kConcWidthLo = 0.1;
inline constexpr double kConcWidthHi = 0.9;
inline constexpr double kDurationLo = 0.002;
inline constexpr double kDurationHi = 0.1;

// Parameter set of one simulation, reproducible from (seed, simulation id).
ParameterSet parameter_set_for(std::uint64_t seed, std::uint32_t simulation_id);

std::vector<ParameterSet> generate_parameter_sets(std::uint32_t n, std::uint64_t seed);

} // namespace instat::launcher
