#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "instat/stats/stats_config.hpp"

namespace instat::stats {

// Precomputed Robbins-Monro step sizes C / n^gamma(n) for n = 1..declared_n.
// One table is shared by every estimator of a study; beyond the declared
// sample size the linear schedule is clamped at gamma = 1 so the step is
// simply C / n.
class StepTable {
public:
    StepTable(double gain_c, GammaSchedule schedule, std::uint64_t declared_n);

    double step(std::uint64_t n) const;

    // steps[i] = step(count[i]) for count[i] > 0, else 0 (seeding position).
    void fill(const std::uint32_t* count, double* steps, std::size_t n) const;

    double gain_c() const { return gain_c_; }
    const GammaSchedule& schedule() const { return schedule_; }
    std::uint64_t declared_n() const { return declared_n_; }

private:
    std::vector<double> table_;
    double gain_c_;
    GammaSchedule schedule_;
    std::uint64_t declared_n_;
};

// One Robbins-Monro quantile estimator: the current estimate plus its step
// schedule state. Value type; field_stats keeps the same state in SoA form.
class QuantileEstimator {
public:
    // q(1) = y1, the first observation of the stream.
    QuantileEstimator(double alpha, const StatisticsConfig& cfg, double y1);

    void update(double y);

    double quantile() const { return q_; }
    double alpha() const { return alpha_; }
    std::uint64_t observations() const { return n_; }
    double gain_c() const { return gain_c_; }
    std::uint64_t declared_n() const { return declared_n_; }
    const GammaSchedule& schedule() const { return schedule_; }

private:
    double alpha_;
    double q_;
    std::uint64_t n_;
    std::uint64_t declared_n_;
    double gain_c_;
    GammaSchedule schedule_;
};

QuantileEstimator init_quantile(double alpha, const StatisticsConfig& cfg, double y1);

// Batch order-statistic estimator: the element of rank floor(alpha*N) + 1
// (1-indexed, capped at N) of the sorted sample. This is the full-sample
// oracle the streaming estimators are validated against.
double empirical_quantile(std::span<const double> sample, double alpha);

// Same rank rule on an already sorted sample (no copy).
double empirical_quantile_sorted(std::span<const double> sorted, double alpha);

} // namespace instat::stats
