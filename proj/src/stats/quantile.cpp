#include "instat/stats/quantile.hpp"

#include <algorithm>
#include <cmath>

namespace instat::stats {

double gamma_linear(std::uint64_t n, std::uint64_t declared_n) {
    if (declared_n < 2) throw ConfigError("gamma_linear: declared sample size must be >= 2");
    if (n < 1) throw ConfigError("gamma_linear: n must be >= 1");
    const std::uint64_t m = std::min(n, declared_n);
    return 0.1 + 0.9 * (static_cast<double>(m - 1) / static_cast<double>(declared_n - 1));
}

void StatisticsConfig::validate() const {
    if (!(gain_c > 0.0)) throw ConfigError("gain_c must be > 0");
    if (declared_n < 2) throw ConfigError("declared_n must be >= 2");
    if (schedule.kind == GammaSchedule::Kind::constant &&
        !(schedule.constant_gamma > 0.0 && schedule.constant_gamma <= 1.0))
        throw ConfigError("constant gamma must be in (0, 1]");
    double prev = 0.0;
    for (double a : quantile_orders) {
        if (!(a > 0.0 && a < 1.0)) throw ConfigError("quantile orders must lie in (0, 1)");
        if (!(a > prev)) throw ConfigError("quantile orders must be strictly increasing");
        prev = a;
    }
    for (double t : thresholds) {
        if (!std::isfinite(t)) throw ConfigError("thresholds must be finite");
    }
}

StepTable::StepTable(double gain_c, GammaSchedule schedule, std::uint64_t declared_n)
    : gain_c_(gain_c), schedule_(schedule), declared_n_(declared_n) {
    if (!(gain_c > 0.0)) throw ConfigError("StepTable: gain must be > 0");
    if (declared_n < 2) throw ConfigError("StepTable: declared sample size must be >= 2");
    table_.resize(declared_n);
    for (std::uint64_t n = 1; n <= declared_n; ++n) {
        table_[n - 1] =
            gain_c / std::pow(static_cast<double>(n), schedule.exponent(n, declared_n));
    }
}

double StepTable::step(std::uint64_t n) const {
    if (n == 0) throw StatError("StepTable: step undefined for n = 0");
    if (n <= declared_n_) return table_[n - 1];
    if (schedule_.kind == GammaSchedule::Kind::linear) {
        // gamma clamps at 1 past the declared size: step is exactly C / n.
        return gain_c_ / static_cast<double>(n);
    }
    return gain_c_ / std::pow(static_cast<double>(n), schedule_.constant_gamma);
}

void StepTable::fill(const std::uint32_t* count, double* steps, std::size_t n) const {
    for (std::size_t i = 0; i < n; ++i) {
        steps[i] = (count[i] == 0) ? 0.0 : step(count[i]);
    }
}

QuantileEstimator::QuantileEstimator(double alpha, const StatisticsConfig& cfg, double y1)
    : alpha_(alpha),
      q_(y1),
      n_(1),
      declared_n_(cfg.declared_n),
      gain_c_(cfg.gain_c),
      schedule_(cfg.schedule) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("quantile order must lie in (0, 1)");
    cfg.validate();
    if (!std::isfinite(y1)) throw DataQualityError("non-finite initial observation", y1);
}

void QuantileEstimator::update(double y) {
    if (!std::isfinite(y)) throw DataQualityError("non-finite observation", y);
    const double gamma = schedule_.kind == GammaSchedule::Kind::linear
                             ? gamma_linear(n_, declared_n_)
                             : schedule_.constant_gamma;
    const double step = gain_c_ / std::pow(static_cast<double>(n_), gamma);
    // Ties (y == q) count as y <= q, moving the estimate down.
    const double sel = (y <= q_) ? (1.0 - alpha_) : -alpha_;
    q_ = q_ - step * sel;
    ++n_;
}

QuantileEstimator init_quantile(double alpha, const StatisticsConfig& cfg, double y1) {
    return QuantileEstimator(alpha, cfg, y1);
}

double empirical_quantile_sorted(std::span<const double> sorted, double alpha) {
    if (sorted.empty()) throw StatError("empirical_quantile: empty sample");
    const std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n))) + 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

double empirical_quantile(std::span<const double> sample, double alpha) {
    if (sample.empty()) throw StatError("empirical_quantile: empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("quantile order must lie in (0, 1)");
    for (double v : sample) {
        if (!std::isfinite(v)) throw DataQualityError("non-finite sample value", v);
    }
    std::vector<double> work(sample.begin(), sample.end());
    const std::size_t n = work.size();
    std::size_t rank = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n))) + 1;
    if (rank > n) rank = n;
    std::nth_element(work.begin(), work.begin() + (rank - 1), work.end());
    return work[rank - 1];
}

} // namespace instat::stats
