#pragma once

#include <functional>
#include <span>

#include "instat/launcher/params.hpp"
#include "instat/sim/solver.hpp"

namespace instat::sim {

// Injection geometry for one parameter set: segment row ranges on the left
// boundary (upper injector grows up from the centerline, lower grows down)
// and whether each is active at simulated time t.
InjectorState injector_state(const launcher::ParameterSet& params, const Grid& grid, double t);

// Run one ensemble member: starting from zero dye, advance the
// convection-diffusion solve one step per timestep and hand the resulting
// field to the emit callback (which typically streams it to the server).
void run_simulation(const launcher::ParameterSet& params, const StudyConfig& cfg,
                    const std::function<void(std::uint32_t timestep,
                                             std::span<const double> field)>& emit);

// FNV-1a hash over every emitted byte, for determinism checks.
std::uint64_t simulation_output_hash(const launcher::ParameterSet& params,
                                     const StudyConfig& cfg);

} // namespace instat::sim
