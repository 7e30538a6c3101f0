#include "instat/sim/dye_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace instat::sim {

InjectorState injector_state(const launcher::ParameterSet& params, const Grid& grid,
                             double t) {
    InjectorState inj;
    inj.conc_upper = params.conc_upper;
    inj.conc_lower = params.conc_lower;

    const std::uint32_t half = grid.ny / 2;
    const auto rows = [&](double width) {
        // Width maps linearly onto a fraction of one half of the boundary,
        // always at least one cell so the minimum width still injects.
        const double cells = width * static_cast<double>(half);
        return std::clamp<std::uint32_t>(
            static_cast<std::uint32_t>(std::lround(cells)), 1, half);
    };

    if (t < params.dur_upper) {
        inj.upper_begin = half;
        inj.upper_end = half + rows(params.width_upper);
    }
    if (t < params.dur_lower) {
        inj.lower_end = half;
        inj.lower_begin = half - rows(params.width_lower);
    }
    return inj;
}

void run_simulation(const launcher::ParameterSet& params, const StudyConfig& cfg,
                    const std::function<void(std::uint32_t, std::span<const double>)>& emit) {
    const Grid grid = Grid::make(cfg.mesh, cfg.simulation);
    const FrozenFlow flow = FrozenFlow::make(grid, cfg.simulation);
    const DyeSolver solver(flow, cfg.simulation.dt, cfg.simulation.diffusivity);

    std::vector<double> c(grid.n_cells(), 0.0);
    for (std::uint32_t step = 0; step < cfg.timesteps; ++step) {
        const double t = step * cfg.simulation.dt;
        solver.step(c, injector_state(params, grid, t));
        emit(step, c);
    }
}

std::uint64_t simulation_output_hash(const launcher::ParameterSet& params,
                                     const StudyConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    run_simulation(params, cfg, [&](std::uint32_t, std::span<const double> field) {
        for (double v : field) {
            const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xff;
                h *= 0x100000001b3ull;
            }
        }
    });
    return h;
}

} // namespace instat::sim
