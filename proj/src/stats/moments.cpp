#include "instat/stats/moments.hpp"

#include <cmath>

#include "instat/stats/kernels.hpp"

namespace instat::stats {

MomentsAccumulator::MomentsAccumulator(std::vector<double> thresholds)
    : thresholds_(std::move(thresholds)), exceed_(thresholds_.size(), 0) {
    for (double t : thresholds_) {
        if (!std::isfinite(t)) throw ConfigError("thresholds must be finite");
    }
}

void MomentsAccumulator::update(double y) {
    if (!std::isfinite(y)) throw DataQualityError("non-finite sample value", y);
    // Single-element call into the reference kernel: one source of truth for
    // the update arithmetic shared with the SoA field arrays.
    kernels::MomentArrays a{&count_, &mean_, &m2_, &m3_, &m4_, &min_, &max_};
    kernels::scalar_kernels().moments_update(a, &y, 1);
    for (std::size_t t = 0; t < thresholds_.size(); ++t) {
        kernels::scalar_kernels().exceed_update(&exceed_[t], &y, thresholds_[t], 1);
    }
}

void MomentsAccumulator::merge(const MomentsAccumulator& other) {
    if (thresholds_ != other.thresholds_)
        throw StatError("merge: accumulators track different threshold lists");
    if (other.count_ == 0) return;
    if (count_ == 0) {
        *this = other;
        return;
    }

    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    const double delta2 = delta * delta;

    const double m2a = m2_, m3a = m3_, m4a = m4_;
    const double m2b = other.m2_, m3b = other.m3_, m4b = other.m4_;

    m4_ = m4a + m4b + delta2 * delta2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
          6.0 * delta2 * (na * na * m2b + nb * nb * m2a) / (n * n) +
          4.0 * delta * (na * m3b - nb * m3a) / n;
    m3_ = m3a + m3b + delta * delta2 * na * nb * (na - nb) / (n * n) +
          3.0 * delta * (na * m2b - nb * m2a) / n;
    m2_ = m2a + m2b + delta2 * na * nb / n;
    mean_ = mean_ + delta * nb / n;
    count_ += other.count_;
    min_ = std::min(min_, other.min_);
    max_ = std::max(max_, other.max_);
    for (std::size_t t = 0; t < exceed_.size(); ++t) exceed_[t] += other.exceed_[t];
}

void MomentsAccumulator::require_samples(std::uint64_t at_least, const char* what) const {
    if (count_ < at_least)
        throw StatError(std::string(what) + ": undefined with count " + std::to_string(count_));
}

double MomentsAccumulator::mean() const {
    require_samples(1, "mean");
    return mean_;
}

double MomentsAccumulator::variance() const {
    require_samples(2, "variance");
    return m2_ / static_cast<double>(count_ - 1);
}

double MomentsAccumulator::skewness() const {
    require_samples(2, "skewness");
    const double n = static_cast<double>(count_);
    return std::sqrt(n) * m3_ / std::pow(m2_, 1.5);
}

double MomentsAccumulator::kurtosis() const {
    require_samples(2, "kurtosis");
    const double n = static_cast<double>(count_);
    return n * m4_ / (m2_ * m2_) - 3.0;
}

double MomentsAccumulator::min() const {
    require_samples(1, "min");
    return min_;
}

double MomentsAccumulator::max() const {
    require_samples(1, "max");
    return max_;
}

double MomentsAccumulator::exceedance_probability(double threshold) const {
    require_samples(1, "exceedance");
    for (std::size_t t = 0; t < thresholds_.size(); ++t) {
        if (thresholds_[t] == threshold)
            return static_cast<double>(exceed_[t]) / static_cast<double>(count_);
    }
    throw StatError("exceedance: threshold not configured");
}

double exceedance_probability(const MomentsAccumulator& acc, double threshold) {
    return acc.exceedance_probability(threshold);
}

} // namespace instat::stats
