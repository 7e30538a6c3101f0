#include "instat/sim/solver.hpp"

namespace instat::sim {

DyeSolver::DyeSolver(const FrozenFlow& flow, double dt, double diffusivity, bool closed_right)
    : flow_(flow), dt_(dt), diffusivity_(diffusivity), closed_right_(closed_right) {
    scratch_.resize(flow_.grid().n_cells());
}

void DyeSolver::step(std::vector<double>& c, const InjectorState& inj) const {
    const Grid& g = flow_.grid();
    const std::uint32_t nx = g.nx, ny = g.ny;

    const auto inflow_value = [&](std::uint32_t j) -> double {
        if (j >= inj.upper_begin && j < inj.upper_end) return inj.conc_upper;
        if (j >= inj.lower_begin && j < inj.lower_end) return inj.conc_lower;
        return 0.0;
    };

    for (std::uint32_t j = 0; j < ny; ++j) {
        for (std::uint32_t i = 0; i < nx; ++i) {
            const std::uint64_t idx = g.cell_index(i, j);
            const double cc = c[idx];
            const double cw = (i > 0) ? c[idx - 1] : cc;
            const double ce = (i + 1 < nx) ? c[idx + 1] : cc;
            const double cs = (j > 0) ? c[idx - nx] : cc;
            const double cn = (j + 1 < ny) ? c[idx + nx] : cc;

            // Advective fluxes, upwind by face-velocity sign. The left
            // boundary carries the injector concentration in, the right is
            // zero-gradient outflow (or a wall in closed mode), and the
            // horizontal walls have zero face velocity by construction.
            const double uw = flow_.u_face(i, j);
            const double ue = flow_.u_face(i + 1, j);
            const double vs = flow_.v_face(i, j);
            const double vn = flow_.v_face(i, j + 1);

            const double flux_w = uw * ((uw > 0.0) ? ((i > 0) ? cw : inflow_value(j)) : cc);
            const double flux_e =
                (i + 1 == nx) ? (closed_right_ ? 0.0 : ue * cc)
                              : ue * ((ue > 0.0) ? cc : ce);
            const double flux_s = vs * ((vs > 0.0) ? cs : cc);
            const double flux_n = vn * ((vn > 0.0) ? cc : cn);

            const double adv = (flux_e - flux_w) / g.dx + (flux_n - flux_s) / g.dy;
            const double lap = (ce - 2.0 * cc + cw) / (g.dx * g.dx) +
                               (cn - 2.0 * cc + cs) / (g.dy * g.dy);

            scratch_[idx] = cc + dt_ * (diffusivity_ * lap - adv);
        }
    }
    c.swap(scratch_);
}

double DyeSolver::total_mass(std::span<const double> c) const {
    const Grid& g = flow_.grid();
    double mass = 0.0;
    for (double v : c) mass += v;
    return mass * g.dx * g.dy;
}

} // namespace instat::sim
