#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "instat/bytes.hpp"
#include "instat/cell_range.hpp"
#include "instat/error.hpp"
#include "instat/stats/quantile.hpp"
#include "instat/stats/stats_config.hpp"

namespace instat::field {

// A derived statistic selector for snapshots and exports.
struct Statistic {
    enum class Kind {
        mean,
        variance,
        skewness,
        kurtosis,
        min,
        max,
        count,
        exceedance, // param = threshold value
        quantile,   // param = quantile order alpha
    };

    Kind kind = Kind::mean;
    double param = 0.0;

    static Statistic mean() { return {Kind::mean, 0.0}; }
    static Statistic variance() { return {Kind::variance, 0.0}; }
    static Statistic skewness() { return {Kind::skewness, 0.0}; }
    static Statistic kurtosis() { return {Kind::kurtosis, 0.0}; }
    static Statistic min() { return {Kind::min, 0.0}; }
    static Statistic max() { return {Kind::max, 0.0}; }
    static Statistic count() { return {Kind::count, 0.0}; }
    static Statistic exceedance(double threshold) { return {Kind::exceedance, threshold}; }
    static Statistic quantile(double alpha) { return {Kind::quantile, alpha}; }

    // Compact stable name, e.g. "mean", "q0.25", "exc0.5"; parse() inverts it.
    std::string name() const;
    static Statistic parse(const std::string& name);

    bool operator==(const Statistic&) const = default;
};

// Dense per-(cell, timestep) accumulator arrays for one named field on one
// partition. Storage is struct-of-arrays per statistic so chunk ingestion
// runs through the data-parallel kernels and exports are contiguous copies.
// Memory is allocated up front and never grows with the number of samples.
class FieldStatistics {
public:
    FieldStatistics(std::string field_name, CellRange cell_range, std::uint32_t n_timesteps,
                    std::shared_ptr<const stats::StatisticsConfig> cfg);

    // Feed one chunk of per-cell samples at a timestep. Every configured
    // quantile estimator and the moment/extrema/exceedance accumulators of
    // the covered cells advance by one observation.
    void ingest_chunk(std::uint32_t timestep, std::uint64_t global_cell_offset,
                      std::span<const double> values);

    // Dense per-cell values of one derived statistic at one timestep, in
    // local cell order.
    std::vector<double> snapshot(const Statistic& stat, std::uint32_t timestep) const;

    std::uint32_t count_at(std::uint64_t global_cell, std::uint32_t timestep) const;
    double quantile_at(std::uint64_t global_cell, std::uint32_t timestep, double alpha) const;

    // Adjacent-order quantile inversions at one timestep: (violations, comparisons).
    std::pair<std::uint64_t, std::uint64_t> quantile_crossings(std::uint32_t timestep) const;

    const std::string& field_name() const { return name_; }
    const CellRange& cell_range() const { return range_; }
    std::uint32_t n_timesteps() const { return n_timesteps_; }
    const stats::StatisticsConfig& config() const { return *cfg_; }

    // Resident accumulator footprint; constant over the life of the study.
    std::size_t footprint_bytes() const;

    void serialize(ByteWriter& w) const;
    void restore(ByteReader& r);

    bool state_equals(const FieldStatistics& other) const;

private:
    std::size_t moment_index(std::uint32_t t, std::uint64_t local) const {
        return static_cast<std::size_t>(t) * n_local_ + local;
    }
    std::size_t exceed_index(std::uint32_t t, std::size_t thr, std::uint64_t local) const {
        return (static_cast<std::size_t>(t) * n_thr_ + thr) * n_local_ + local;
    }
    std::size_t quant_index(std::uint32_t t, std::size_t a, std::uint64_t local) const {
        return (static_cast<std::size_t>(t) * n_alpha_ + a) * n_local_ + local;
    }
    std::size_t alpha_index(double alpha) const;
    std::size_t threshold_index(double threshold) const;
    void require_counts(std::uint32_t timestep, std::uint32_t at_least, const char* what) const;

    std::string name_;
    CellRange range_;
    std::uint32_t n_timesteps_;
    std::shared_ptr<const stats::StatisticsConfig> cfg_;
    stats::StepTable steps_;

    std::size_t n_local_;
    std::size_t n_alpha_;
    std::size_t n_thr_;

    std::vector<std::uint32_t> counts_;
    std::vector<double> mean_, m2_, m3_, m4_, min_, max_;
    std::vector<std::uint32_t> exceed_;
    std::vector<double> quant_;
    std::vector<double> step_scratch_;
};

} // namespace instat::field
