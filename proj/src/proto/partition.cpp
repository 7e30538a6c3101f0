#include "instat/proto/partition.hpp"

#include <algorithm>

namespace instat::proto {

PartitionMap::PartitionMap(std::uint64_t n_cells, std::uint32_t n_ranks)
    : n_cells_(n_cells), n_ranks_(n_ranks) {
    if (n_ranks == 0) throw ConfigError("partition needs at least one rank");
    if (n_cells < n_ranks)
        throw ConfigError("cannot partition " + std::to_string(n_cells) + " cells across " +
                          std::to_string(n_ranks) + " ranks");
    boundaries_.resize(n_ranks + 1);
    const std::uint64_t base = n_cells / n_ranks;
    const std::uint64_t remainder = n_cells % n_ranks;
    boundaries_[0] = 0;
    for (std::uint32_t r = 0; r < n_ranks; ++r) {
        boundaries_[r + 1] = boundaries_[r] + base + (r < remainder ? 1 : 0);
    }
}

CellRange PartitionMap::rank_range(std::uint32_t rank) const {
    if (rank >= n_ranks_) throw ConfigError("rank out of range");
    return {boundaries_[rank], boundaries_[rank + 1]};
}

std::uint32_t PartitionMap::owner(std::uint64_t cell) const {
    if (cell >= n_cells_) throw ProtocolError("cell index out of range");
    const auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), cell);
    return static_cast<std::uint32_t>(it - boundaries_.begin() - 1);
}

std::vector<RoutedChunk> PartitionMap::route(const CellRange& client_range) const {
    if (client_range.empty()) throw ProtocolError("route: empty cell interval");
    if (client_range.end > n_cells_) throw ProtocolError("route: interval out of range");

    std::vector<RoutedChunk> out;
    std::uint64_t cursor = client_range.begin;
    std::uint32_t rank = owner(cursor);
    while (cursor < client_range.end) {
        const std::uint64_t block_end = boundaries_[rank + 1];
        const std::uint64_t piece_end = std::min(block_end, client_range.end);
        out.push_back({rank, {cursor, piece_end}});
        cursor = piece_end;
        ++rank;
    }
    return out;
}

} // namespace instat::proto
