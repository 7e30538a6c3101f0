#pragma once

#include <cstdint>

namespace instat {

// SplitMix64 finalizer. Good avalanche, cheap, and fully portable: the same
// (seed, stream, counter) triple yields the same bits on every platform,
// which is what study reproducibility and the paired estimator comparisons
// in the validation harness rely on.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Counter-based random stream: stateless, O(1) access to the i-th draw.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix64(mix64(seed) ^ mix64(stream * 0xD6E8FEB86659FD93ull + 1))) {}

    std::uint64_t bits(std::uint64_t counter) const {
        return mix64(key_ ^ (counter * 0xA24BAED4963EE407ull + 0x9FB21C651E98DF25ull));
    }

    // Uniform on the open interval (0, 1): 53-bit mantissa shifted by half an
    // ulp so inverse-CDF transforms never see 0 or 1 exactly.
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
        // 128-bit multiply keeps the mapping unbiased enough for test use
        // (bias < 2^-64 per draw).
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
    }

private:
    std::uint64_t key_;
};

// Stateful convenience wrapper over CounterRng.
class RngSequence {
public:
    RngSequence(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}

    double uniform() { return rng_.uniform(next_++); }
    std::uint64_t bits() { return rng_.bits(next_++); }
    std::uint64_t below(std::uint64_t n) { return rng_.below(next_++, n); }

private:
    CounterRng rng_;
    std::uint64_t next_ = 0;
};

} // namespace instat
