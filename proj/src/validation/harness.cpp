#include "instat/validation/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "instat/error.hpp"
#include "instat/rng.hpp"
#include "instat/stats/quantile.hpp"

namespace instat::validation {

std::string EstimatorSpec::label() const {
    switch (kind) {
    case Kind::empirical: return "empirical";
    case Kind::rm_linear: return "rm_linear";
    case Kind::rm_constant: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "rm_gamma%.1f", gamma);
        return buf;
    }
    }
    return "?";
}

std::vector<EstimatorSpec> EstimatorSpec::comparison_set(bool include_gamma06) {
    std::vector<EstimatorSpec> out = {empirical(), rm_constant(0.5), rm_constant(0.7),
                                      rm_constant(0.9), rm_linear()};
    if (include_gamma06) out.insert(out.begin() + 3, rm_constant(0.6));
    return out;
}

namespace {

stats::StatisticsConfig rm_config(const EstimatorSpec& est, std::uint64_t capital_n) {
    stats::StatisticsConfig cfg;
    cfg.gain_c = 1.0;
    cfg.declared_n = capital_n;
    cfg.schedule = est.kind == EstimatorSpec::Kind::rm_linear
                       ? stats::GammaSchedule::linear()
                       : stats::GammaSchedule::constant(est.gamma);
    return cfg;
}

} // namespace

std::vector<std::vector<double>> run_trajectories(TargetDist dist, const EstimatorSpec& est,
                                                  std::uint32_t n_traj,
                                                  std::uint64_t capital_n, double alpha,
                                                  std::uint64_t seed) {
    if (est.kind == EstimatorSpec::Kind::empirical)
        throw ConfigError("trajectories are defined for the Robbins-Monro estimators");
    const stats::StatisticsConfig cfg = rm_config(est, capital_n);

    std::vector<std::vector<double>> out(n_traj);
    for (std::uint32_t k = 0; k < n_traj; ++k) {
        const CounterRng rng(seed, k);
        std::vector<double>& path = out[k];
        path.reserve(capital_n);
        stats::QuantileEstimator q(alpha, cfg, sample_from_uniform(dist, rng.uniform(0)));
        path.push_back(q.quantile());
        for (std::uint64_t n = 1; n < capital_n; ++n) {
            q.update(sample_from_uniform(dist, rng.uniform(n)));
            path.push_back(q.quantile());
        }
    }
    return out;
}

DistributionStudy run_distribution_study(TargetDist dist, double alpha,
                                         std::uint64_t capital_n, std::uint32_t n_repeat,
                                         std::uint64_t seed, bool include_gamma06) {
    DistributionStudy study;
    study.dist = dist;
    study.alpha = alpha;
    study.exact = exact_quantile(dist, alpha);
    study.estimators = EstimatorSpec::comparison_set(include_gamma06);
    study.finals.assign(study.estimators.size(), {});
    for (auto& v : study.finals) v.reserve(n_repeat);

    std::vector<double> sample(capital_n);
    for (std::uint32_t rep = 0; rep < n_repeat; ++rep) {
        const CounterRng rng(seed, rep);
        for (std::uint64_t n = 0; n < capital_n; ++n)
            sample[n] = sample_from_uniform(dist, rng.uniform(n));

        for (std::size_t e = 0; e < study.estimators.size(); ++e) {
            const EstimatorSpec& est = study.estimators[e];
            if (est.kind == EstimatorSpec::Kind::empirical) {
                study.finals[e].push_back(stats::empirical_quantile(sample, alpha));
            } else {
                const stats::StatisticsConfig cfg = rm_config(est, capital_n);
                stats::QuantileEstimator q(alpha, cfg, sample[0]);
                for (std::uint64_t n = 1; n < capital_n; ++n) q.update(sample[n]);
                study.finals[e].push_back(q.quantile());
            }
        }
    }
    return study;
}

Summary summarize(std::span<const double> estimates, double exact) {
    if (estimates.empty()) throw StatError("summarize: empty estimate list");
    const double n = static_cast<double>(estimates.size());
    double mean = 0.0;
    for (double v : estimates) mean += v;
    mean /= n;
    double var = 0.0, mse = 0.0;
    for (double v : estimates) {
        var += (v - mean) * (v - mean);
        mse += (v - exact) * (v - exact);
    }
    Summary s;
    s.bias = mean - exact;
    s.std_dev = estimates.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    s.rmse = std::sqrt(mse / n);
    std::vector<double> sorted(estimates.begin(), estimates.end());
    std::sort(sorted.begin(), sorted.end());
    s.band_lo = stats::empirical_quantile_sorted(sorted, 0.05);
    s.band_hi = stats::empirical_quantile_sorted(sorted, 0.95);
    return s;
}

} // namespace instat::validation
