#pragma once

#include <vector>

#include "instat/sim/grid.hpp"

namespace instat::sim {

// Steady incompressible channel flow around circular obstacles, built from a
// streamfunction evaluated at cell corners. Face-normal velocities are
// streamfunction differences, so the discrete divergence of every cell
// telescopes to zero (up to roundoff) by construction, and the velocity is
// identically zero inside obstacles where the streamfunction is constant.
class FrozenFlow {
public:
    static FrozenFlow make(const Grid& grid, const SimConfig& cfg);

    // Face-normal velocities. u lives on x-faces (i in [0, nx], j in
    // [0, ny)); v lives on y-faces (i in [0, nx), j in [0, ny]).
    double u_face(std::uint32_t i, std::uint32_t j) const { return u_[j * (grid_.nx + 1) + i]; }
    double v_face(std::uint32_t i, std::uint32_t j) const { return v_[j * grid_.nx + i]; }

    // Cell-centered velocity (face averages), for diagnostics.
    double u_cell(std::uint32_t i, std::uint32_t j) const {
        return 0.5 * (u_face(i, j) + u_face(i + 1, j));
    }
    double v_cell(std::uint32_t i, std::uint32_t j) const {
        return 0.5 * (v_face(i, j) + v_face(i, j + 1));
    }

    // Discrete divergence of one cell.
    double divergence(std::uint32_t i, std::uint32_t j) const {
        return (u_face(i + 1, j) - u_face(i, j)) / grid_.dx +
               (v_face(i, j + 1) - v_face(i, j)) / grid_.dy;
    }

    double max_abs_u() const { return max_u_; }
    double max_abs_v() const { return max_v_; }

    // Stability numbers for an explicit upwind + central-diffusion step.
    double cfl_x(double dt) const { return max_u_ * dt / grid_.dx; }
    double cfl_y(double dt) const { return max_v_ * dt / grid_.dy; }
    double diffusion_number(double kappa, double dt) const {
        return kappa * dt * (1.0 / (grid_.dx * grid_.dx) + 1.0 / (grid_.dy * grid_.dy));
    }

    const Grid& grid() const { return grid_; }

private:
    FrozenFlow(Grid grid) : grid_(grid) {}

    Grid grid_;
    std::vector<double> u_;
    std::vector<double> v_;
    double max_u_ = 0.0;
    double max_v_ = 0.0;
};

} // namespace instat::sim
