#pragma once

#include <chrono>

namespace instat {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;
using Ms = std::chrono::milliseconds;

inline std::int64_t ms_since(TimePoint from, TimePoint to) {
    return std::chrono::duration_cast<Ms>(to - from).count();
}

// Fixed-period schedule; fires immediately on the first call, then once per
// period. Catch-up after a stall collapses into one fire.
class PeriodicDeadline {
public:
    PeriodicDeadline(Ms period, TimePoint now) : period_(period), next_(now) {}

    bool due(TimePoint now) {
        if (now < next_) return false;
        do {
            next_ += period_;
        } while (next_ <= now);
        return true;
    }

    TimePoint next() const { return next_; }

private:
    Ms period_;
    TimePoint next_;
};

} // namespace instat
