#pragma once

#include <cstdint>
#include <vector>

#include "instat/cell_range.hpp"
#include "instat/error.hpp"

namespace instat::proto {

struct RoutedChunk {
    std::uint32_t rank = 0;
    CellRange cells;

    bool operator==(const RoutedChunk&) const = default;
};

// Static contiguous block partition of [0, n_cells) across server ranks.
// Blocks differ in size by at most one cell; the remainder goes to the
// lowest ranks.
class PartitionMap {
public:
    PartitionMap(std::uint64_t n_cells, std::uint32_t n_ranks);

    std::uint64_t n_cells() const { return n_cells_; }
    std::uint32_t n_ranks() const { return n_ranks_; }
    const std::vector<std::uint64_t>& boundaries() const { return boundaries_; }

    CellRange rank_range(std::uint32_t rank) const;
    std::uint32_t owner(std::uint64_t cell) const;

    // Split a client-side cell interval into per-rank sub-intervals. The
    // result is ordered, disjoint, and covers the input exactly.
    std::vector<RoutedChunk> route(const CellRange& client_range) const;

    bool operator==(const PartitionMap&) const = default;

private:
    std::uint64_t n_cells_;
    std::uint32_t n_ranks_;
    std::vector<std::uint64_t> boundaries_;
};

} // namespace instat::proto
