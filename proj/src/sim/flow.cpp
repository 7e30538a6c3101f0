#include "instat/sim/flow.hpp"

#include <algorithm>
#include <cmath>

#include "instat/error.hpp"

namespace instat::sim {

namespace {

double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * (3.0 - 2.0 * t);
}

} // namespace

FrozenFlow FrozenFlow::make(const Grid& grid, const SimConfig& cfg) {
    // Obstacles must sit inside the channel with their blend region clear of
    // the walls; the streamfunction is constant along both walls only then.
    const double blend = 6.0 * std::max(grid.dx, grid.dy);
    for (const auto& o : cfg.obstacles) {
        if (!(o.r > 0.0)) throw ConfigError("obstacle radius must be positive");
        const double reach = o.r + blend;
        if (o.x - reach < 0.0 || o.x + reach > cfg.domain_x || o.y - reach < 0.0 ||
            o.y + reach > cfg.domain_y)
            throw ConfigError("obstacle (incl. blend region) must lie inside the domain");
    }

    const double y_mid = cfg.domain_y / 2.0;
    // Ambient linear streamfunction, blended per obstacle toward the
    // constant level through the obstacle center. The deformation is local
    // to each blend ring, so peak speeds stay a small multiple of the
    // inflow speed wherever the obstacle sits.
    const auto psi = [&](double x, double y) {
        double value = cfg.inflow_speed * (y - y_mid);
        for (const auto& o : cfg.obstacles) {
            const double dxo = x - o.x;
            const double dyo = y - o.y;
            const double dist = std::sqrt(dxo * dxo + dyo * dyo);
            const double b = smoothstep((dist - o.r) / blend);
            value = value * b + cfg.inflow_speed * (o.y - y_mid) * (1.0 - b);
        }
        return value;
    };

    FrozenFlow flow(grid);
    const std::uint32_t nx = grid.nx, ny = grid.ny;

    // Corner streamfunction values.
    std::vector<double> psi_node((nx + 1) * (ny + 1));
    for (std::uint32_t j = 0; j <= ny; ++j) {
        for (std::uint32_t i = 0; i <= nx; ++i) {
            psi_node[j * (nx + 1) + i] = psi(grid.node_x(i), grid.node_y(j));
        }
    }

    flow.u_.resize((nx + 1) * ny);
    flow.v_.resize(nx * (ny + 1));
    for (std::uint32_t j = 0; j < ny; ++j) {
        for (std::uint32_t i = 0; i <= nx; ++i) {
            const double top = psi_node[(j + 1) * (nx + 1) + i];
            const double bot = psi_node[j * (nx + 1) + i];
            flow.u_[j * (nx + 1) + i] = (top - bot) / grid.dy;
        }
    }
    for (std::uint32_t j = 0; j <= ny; ++j) {
        for (std::uint32_t i = 0; i < nx; ++i) {
            const double right = psi_node[j * (nx + 1) + i + 1];
            const double left = psi_node[j * (nx + 1) + i];
            flow.v_[j * nx + i] = -(right - left) / grid.dx;
        }
    }

    for (double u : flow.u_) flow.max_u_ = std::max(flow.max_u_, std::fabs(u));
    for (double v : flow.v_) flow.max_v_ = std::max(flow.max_v_, std::fabs(v));

    const double diff = flow.diffusion_number(cfg.diffusivity, cfg.dt);
    if (flow.cfl_x(cfg.dt) >= 1.0 || flow.cfl_y(cfg.dt) >= 1.0)
        throw ConfigError("CFL violation: reduce dt or inflow_speed (cfl_x=" +
                          std::to_string(flow.cfl_x(cfg.dt)) +
                          ", cfl_y=" + std::to_string(flow.cfl_y(cfg.dt)) + ")");
    if (diff > 0.25)
        throw ConfigError("diffusion number " + std::to_string(diff) + " exceeds 0.25");
    // Per-cell positivity of the update's own-cell coefficient: the exact
    // monotonicity condition for upwind advection plus central diffusion.
    double worst = 0.0;
    for (std::uint32_t j = 0; j < ny; ++j) {
        for (std::uint32_t i = 0; i < nx; ++i) {
            const double out_x = std::max(flow.u_face(i + 1, j), 0.0) -
                                 std::min(flow.u_face(i, j), 0.0);
            const double out_y = std::max(flow.v_face(i, j + 1), 0.0) -
                                 std::min(flow.v_face(i, j), 0.0);
            worst = std::max(worst, out_x / grid.dx + out_y / grid.dy);
        }
    }
    const double own_coeff = cfg.dt * worst + 2.0 * diff;
    if (own_coeff > 1.0)
        throw ConfigError("advection-diffusion update is non-monotone (coefficient " +
                          std::to_string(own_coeff) + " > 1); reduce dt");
    return flow;
}

} // namespace instat::sim
