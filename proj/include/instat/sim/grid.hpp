#pragma once

#include <cstdint>

#include "instat/config.hpp"

namespace instat::sim {

// Uniform structured grid over a rectangular channel. Global cell index is
// j * nx + i with i along the flow (x) and j across it (y).
struct Grid {
    std::uint32_t nx = 0;
    std::uint32_t ny = 0;
    double dx = 0.0;
    double dy = 0.0;

    static Grid make(const MeshConfig& mesh, const SimConfig& sim) {
        return {mesh.nx, mesh.ny, sim.domain_x / mesh.nx, sim.domain_y / mesh.ny};
    }

    std::uint64_t n_cells() const {
        return static_cast<std::uint64_t>(nx) * static_cast<std::uint64_t>(ny);
    }
    std::uint64_t cell_index(std::uint32_t i, std::uint32_t j) const {
        return static_cast<std::uint64_t>(j) * nx + i;
    }
    double cell_x(std::uint32_t i) const { return (i + 0.5) * dx; }
    double cell_y(std::uint32_t j) const { return (j + 0.5) * dy; }
    // Node (cell corner) coordinates, for the streamfunction.
    double node_x(std::uint32_t i) const { return i * dx; }
    double node_y(std::uint32_t j) const { return j * dy; }
};

} // namespace instat::sim
