#include "instat/field/field_stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "instat/stats/kernels.hpp"

namespace instat::field {

namespace {

std::string format_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

std::string Statistic::name() const {
    switch (kind) {
    case Kind::mean: return "mean";
    case Kind::variance: return "variance";
    case Kind::skewness: return "skewness";
    case Kind::kurtosis: return "kurtosis";
    case Kind::min: return "min";
    case Kind::max: return "max";
    case Kind::count: return "count";
    case Kind::exceedance: return "exc" + format_param(param);
    case Kind::quantile: return "q" + format_param(param);
    }
    return "?";
}

Statistic Statistic::parse(const std::string& name) {
    if (name == "mean") return mean();
    if (name == "variance") return variance();
    if (name == "skewness") return skewness();
    if (name == "kurtosis") return kurtosis();
    if (name == "min") return min();
    if (name == "max") return max();
    if (name == "count") return count();
    if (name.rfind("exc", 0) == 0) return exceedance(std::stod(name.substr(3)));
    if (name.rfind('q', 0) == 0) return quantile(std::stod(name.substr(1)));
    throw ConfigError("unknown statistic name: " + name);
}

FieldStatistics::FieldStatistics(std::string field_name, CellRange cell_range,
                                 std::uint32_t n_timesteps,
                                 std::shared_ptr<const stats::StatisticsConfig> cfg)
    : name_(std::move(field_name)),
      range_(cell_range),
      n_timesteps_(n_timesteps),
      cfg_(std::move(cfg)),
      steps_(cfg_->gain_c, cfg_->schedule, cfg_->declared_n),
      n_local_(range_.size()),
      n_alpha_(cfg_->quantile_orders.size()),
      n_thr_(cfg_->thresholds.size()) {
    cfg_->validate();
    if (range_.empty()) throw ConfigError("field partition must own at least one cell");
    if (n_timesteps_ == 0) throw ConfigError("field needs at least one timestep");

    const std::size_t cells = n_local_ * n_timesteps_;
    counts_.assign(cells, 0);
    mean_.assign(cells, 0.0);
    m2_.assign(cells, 0.0);
    m3_.assign(cells, 0.0);
    m4_.assign(cells, 0.0);
    min_.assign(cells, std::numeric_limits<double>::infinity());
    max_.assign(cells, -std::numeric_limits<double>::infinity());
    exceed_.assign(cells * n_thr_, 0);
    quant_.assign(cells * n_alpha_, 0.0);
    step_scratch_.assign(n_local_, 0.0);
}

void FieldStatistics::ingest_chunk(std::uint32_t timestep, std::uint64_t global_cell_offset,
                                   std::span<const double> values) {
    if (timestep >= n_timesteps_)
        throw ProtocolError("ingest: timestep " + std::to_string(timestep) + " out of range");
    if (values.empty()) throw ProtocolError("ingest: empty chunk");
    const CellRange chunk{global_cell_offset, global_cell_offset + values.size()};
    if (!range_.contains(chunk))
        throw ProtocolError("ingest: chunk cells outside the owned partition");

    // Validate before touching any state so a bad sample cannot leave a
    // half-applied chunk behind.
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw DataQualityError("non-finite sample value", values[i],
                                   global_cell_offset + i, timestep);
    }

    const std::uint64_t local = global_cell_offset - range_.begin;
    const std::size_t n = values.size();
    const auto& k = stats::kernels::active_kernels();

    std::uint32_t* counts = counts_.data() + moment_index(timestep, local);
    double* steps = step_scratch_.data();
    steps_.fill(counts, steps, n);

    for (std::size_t a = 0; a < n_alpha_; ++a) {
        k.rm_update(quant_.data() + quant_index(timestep, a, local), values.data(), steps,
                    counts, cfg_->quantile_orders[a], n);
    }
    for (std::size_t t = 0; t < n_thr_; ++t) {
        k.exceed_update(exceed_.data() + exceed_index(timestep, t, local), values.data(),
                        cfg_->thresholds[t], n);
    }
    stats::kernels::MomentArrays arrays{counts,
                                        mean_.data() + moment_index(timestep, local),
                                        m2_.data() + moment_index(timestep, local),
                                        m3_.data() + moment_index(timestep, local),
                                        m4_.data() + moment_index(timestep, local),
                                        min_.data() + moment_index(timestep, local),
                                        max_.data() + moment_index(timestep, local)};
    k.moments_update(arrays, values.data(), n);
}

std::size_t FieldStatistics::alpha_index(double alpha) const {
    for (std::size_t a = 0; a < n_alpha_; ++a) {
        if (cfg_->quantile_orders[a] == alpha) return a;
    }
    throw StatError("quantile order " + format_param(alpha) + " is not configured");
}

std::size_t FieldStatistics::threshold_index(double threshold) const {
    for (std::size_t t = 0; t < n_thr_; ++t) {
        if (cfg_->thresholds[t] == threshold) return t;
    }
    throw StatError("threshold " + format_param(threshold) + " is not configured");
}

void FieldStatistics::require_counts(std::uint32_t timestep, std::uint32_t at_least,
                                     const char* what) const {
    for (std::uint64_t i = 0; i < n_local_; ++i) {
        if (counts_[moment_index(timestep, i)] < at_least)
            throw StatError(std::string(what) + ": insufficient samples at cell " +
                            std::to_string(range_.begin + i) + ", timestep " +
                            std::to_string(timestep));
    }
}

std::vector<double> FieldStatistics::snapshot(const Statistic& stat,
                                              std::uint32_t timestep) const {
    if (timestep >= n_timesteps_) throw StatError("snapshot: timestep out of range");
    std::vector<double> out(n_local_);
    const std::size_t base = moment_index(timestep, 0);

    switch (stat.kind) {
    case Statistic::Kind::count:
        for (std::uint64_t i = 0; i < n_local_; ++i)
            out[i] = static_cast<double>(counts_[base + i]);
        return out;
    case Statistic::Kind::mean:
        require_counts(timestep, 1, "mean");
        for (std::uint64_t i = 0; i < n_local_; ++i) out[i] = mean_[base + i];
        return out;
    case Statistic::Kind::min:
        require_counts(timestep, 1, "min");
        for (std::uint64_t i = 0; i < n_local_; ++i) out[i] = min_[base + i];
        return out;
    case Statistic::Kind::max:
        require_counts(timestep, 1, "max");
        for (std::uint64_t i = 0; i < n_local_; ++i) out[i] = max_[base + i];
        return out;
    case Statistic::Kind::variance:
        require_counts(timestep, 2, "variance");
        for (std::uint64_t i = 0; i < n_local_; ++i)
            out[i] = m2_[base + i] / static_cast<double>(counts_[base + i] - 1);
        return out;
    case Statistic::Kind::skewness:
        require_counts(timestep, 2, "skewness");
        for (std::uint64_t i = 0; i < n_local_; ++i) {
            const double n = static_cast<double>(counts_[base + i]);
            out[i] = std::sqrt(n) * m3_[base + i] / std::pow(m2_[base + i], 1.5);
        }
        return out;
    case Statistic::Kind::kurtosis:
        require_counts(timestep, 2, "kurtosis");
        for (std::uint64_t i = 0; i < n_local_; ++i) {
            const double n = static_cast<double>(counts_[base + i]);
            out[i] = n * m4_[base + i] / (m2_[base + i] * m2_[base + i]) - 3.0;
        }
        return out;
    case Statistic::Kind::exceedance: {
        require_counts(timestep, 1, "exceedance");
        const std::size_t t = threshold_index(stat.param);
        for (std::uint64_t i = 0; i < n_local_; ++i) {
            out[i] = static_cast<double>(exceed_[exceed_index(timestep, t, i)]) /
                     static_cast<double>(counts_[base + i]);
        }
        return out;
    }
    case Statistic::Kind::quantile: {
        require_counts(timestep, 1, "quantile");
        const std::size_t a = alpha_index(stat.param);
        const std::size_t qbase = quant_index(timestep, a, 0);
        for (std::uint64_t i = 0; i < n_local_; ++i) out[i] = quant_[qbase + i];
        return out;
    }
    }
    throw StatError("snapshot: unknown statistic");
}

std::uint32_t FieldStatistics::count_at(std::uint64_t global_cell,
                                        std::uint32_t timestep) const {
    if (!range_.contains(global_cell) || timestep >= n_timesteps_)
        throw StatError("count_at: position out of range");
    return counts_[moment_index(timestep, global_cell - range_.begin)];
}

double FieldStatistics::quantile_at(std::uint64_t global_cell, std::uint32_t timestep,
                                    double alpha) const {
    if (!range_.contains(global_cell) || timestep >= n_timesteps_)
        throw StatError("quantile_at: position out of range");
    return quant_[quant_index(timestep, alpha_index(alpha), global_cell - range_.begin)];
}

std::pair<std::uint64_t, std::uint64_t>
FieldStatistics::quantile_crossings(std::uint32_t timestep) const {
    std::uint64_t violations = 0, comparisons = 0;
    if (n_alpha_ < 2) return {0, 0};
    for (std::size_t a = 0; a + 1 < n_alpha_; ++a) {
        const std::size_t lo = quant_index(timestep, a, 0);
        const std::size_t hi = quant_index(timestep, a + 1, 0);
        for (std::uint64_t i = 0; i < n_local_; ++i) {
            comparisons++;
            if (quant_[hi + i] < quant_[lo + i]) violations++;
        }
    }
    return {violations, comparisons};
}

std::size_t FieldStatistics::footprint_bytes() const {
    return counts_.capacity() * sizeof(std::uint32_t) +
           (mean_.capacity() + m2_.capacity() + m3_.capacity() + m4_.capacity() +
            min_.capacity() + max_.capacity() + quant_.capacity() + step_scratch_.capacity()) *
               sizeof(double) +
           exceed_.capacity() * sizeof(std::uint32_t);
}

void FieldStatistics::serialize(ByteWriter& w) const {
    w.str(name_);
    w.u64(range_.begin);
    w.u64(range_.end);
    w.u32(n_timesteps_);
    w.u32(static_cast<std::uint32_t>(n_alpha_));
    w.u32(static_cast<std::uint32_t>(n_thr_));
    w.u32_array(counts_);
    w.f64_array(mean_);
    w.f64_array(m2_);
    w.f64_array(m3_);
    w.f64_array(m4_);
    w.f64_array(min_);
    w.f64_array(max_);
    w.u32_array(exceed_);
    w.f64_array(quant_);
}

void FieldStatistics::restore(ByteReader& r) {
    const std::string name = r.str();
    const CellRange range{r.u64(), r.u64()};
    const std::uint32_t n_t = r.u32();
    const std::uint32_t n_a = r.u32();
    const std::uint32_t n_th = r.u32();
    if (name != name_ || range != range_ || n_t != n_timesteps_ || n_a != n_alpha_ ||
        n_th != n_thr_)
        throw CheckpointError("field statistics layout mismatch for field " + name);
    r.u32_array(counts_);
    r.f64_array(mean_);
    r.f64_array(m2_);
    r.f64_array(m3_);
    r.f64_array(m4_);
    r.f64_array(min_);
    r.f64_array(max_);
    r.u32_array(exceed_);
    r.f64_array(quant_);
}

bool FieldStatistics::state_equals(const FieldStatistics& other) const {
    return name_ == other.name_ && range_ == other.range_ &&
           n_timesteps_ == other.n_timesteps_ && counts_ == other.counts_ &&
           mean_ == other.mean_ && m2_ == other.m2_ && m3_ == other.m3_ && m4_ == other.m4_ &&
           min_ == other.min_ && max_ == other.max_ && exceed_ == other.exceed_ &&
           quant_ == other.quant_;
}

} // namespace instat::field
