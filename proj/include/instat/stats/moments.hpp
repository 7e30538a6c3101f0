#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "instat/error.hpp"

namespace instat::stats {

// One-pass accumulator for a single scalar stream: count, mean, centered
// power sums up to order 4, extrema and per-threshold exceedance counters.
// Updates use the numerically stable incremental forms; merge combines two
// accumulators over disjoint sample sets with the pairwise formulas.
//
// Derived statistics are undefined on an empty accumulator and throw.
// Skewness is reported as g1 = sqrt(n) m3 / m2^1.5 and kurtosis as excess
// g2 = n m4 / m2^2 - 3; both are NaN for degenerate (zero-variance) streams.
class MomentsAccumulator {
public:
    MomentsAccumulator() = default;
    explicit MomentsAccumulator(std::vector<double> thresholds);

    void update(double y);
    void merge(const MomentsAccumulator& other);

    std::uint64_t count() const { return count_; }
    double mean() const;
    double variance() const; // unbiased, requires count >= 2
    double skewness() const;
    double kurtosis() const;
    double min() const;
    double max() const;
    double exceedance_probability(double threshold) const;

    // Raw state, for serialization and oracles.
    double m2() const { return m2_; }
    double m3() const { return m3_; }
    double m4() const { return m4_; }
    const std::vector<double>& thresholds() const { return thresholds_; }
    const std::vector<std::uint32_t>& exceed_counts() const { return exceed_; }

    bool operator==(const MomentsAccumulator&) const = default;

private:
    void require_samples(std::uint64_t at_least, const char* what) const;

    std::uint32_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double m3_ = 0.0;
    double m4_ = 0.0;
    double min_ = std::numeric_limits<double>::infinity();
    double max_ = -std::numeric_limits<double>::infinity();
    std::vector<double> thresholds_;
    std::vector<std::uint32_t> exceed_;
};

double exceedance_probability(const MomentsAccumulator& acc, double threshold);

} // namespace instat::stats
