#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "instat/validation/distributions.hpp"

namespace instat::validation {

// The estimators compared in the calibration study: the batch empirical
// estimator plus Robbins-Monro variants with constant or linear gamma.
struct EstimatorSpec {
    enum class Kind { empirical, rm_constant, rm_linear };

    Kind kind = Kind::rm_linear;
    double gamma = 0.0; // rm_constant only

    std::string label() const;

    static EstimatorSpec empirical() { return {Kind::empirical, 0.0}; }
    static EstimatorSpec rm_constant(double gamma) { return {Kind::rm_constant, gamma}; }
    static EstimatorSpec rm_linear() { return {Kind::rm_linear, 0.0}; }

    // The comparison set: empirical, gamma in {0.5, 0.7, 0.9}, linear, and
    // optionally gamma = 0.6.
    static std::vector<EstimatorSpec> comparison_set(bool include_gamma06 = false);

    bool operator==(const EstimatorSpec&) const = default;
};

// Independent Robbins-Monro trajectories q(1..N); one row per trajectory.
// Reproducible from the seed: trajectory k consumes stream k.
std::vector<std::vector<double>> run_trajectories(TargetDist dist, const EstimatorSpec& est,
                                                  std::uint32_t n_traj,
                                                  std::uint64_t capital_n, double alpha,
                                                  std::uint64_t seed);

// Final estimates of every comparison estimator over n_repeat repetitions.
// Within a repetition all estimators consume the same sample sequence, so
// differences are purely algorithmic.
struct DistributionStudy {
    TargetDist dist;
    double alpha = 0.0;
    double exact = 0.0;
    std::vector<EstimatorSpec> estimators;
    std::vector<std::vector<double>> finals; // [estimator][repetition]
};

DistributionStudy run_distribution_study(TargetDist dist, double alpha,
                                         std::uint64_t capital_n, std::uint32_t n_repeat,
                                         std::uint64_t seed, bool include_gamma06 = false);

struct Summary {
    double bias = 0.0;
    double std_dev = 0.0;
    double rmse = 0.0;
    double band_lo = 0.0; // 5th / 95th percentile of the estimates
    double band_hi = 0.0;
};

Summary summarize(std::span<const double> estimates, double exact);

} // namespace instat::validation
