#pragma once

#include <cstdint>

namespace instat {

// Half-open interval of global cell indices.
struct CellRange {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;

    std::uint64_t size() const { return end - begin; }
    bool empty() const { return end <= begin; }
    bool contains(std::uint64_t cell) const { return cell >= begin && cell < end; }
    bool contains(const CellRange& r) const { return r.begin >= begin && r.end <= end; }

    bool operator==(const CellRange&) const = default;
};

} // namespace instat
