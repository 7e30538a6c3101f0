#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "instat/config.hpp"
#include "instat/field/field_stats.hpp"
#include "instat/server/rank_core.hpp"

namespace instat::server {

// Binary field export: one file per (field, statistic) holding dense 64-bit
// float arrays in global cell order, one array per timestep, behind a small
// self-describing header. Reads reproduce written values bit-exactly.
class FieldExportFile {
public:
    FieldExportFile() = default;
    ~FieldExportFile();
    FieldExportFile(FieldExportFile&&) noexcept;
    FieldExportFile& operator=(FieldExportFile&&) noexcept;
    FieldExportFile(const FieldExportFile&) = delete;
    FieldExportFile& operator=(const FieldExportFile&) = delete;

    static FieldExportFile create(const std::string& path, const std::string& field,
                                  const std::string& stat, std::uint64_t n_cells,
                                  std::uint32_t n_timesteps);
    static FieldExportFile open(const std::string& path);

    void write_cells(std::uint32_t timestep, std::uint64_t cell_begin,
                     std::span<const double> values);
    std::vector<double> read_timestep(std::uint32_t timestep) const;
    std::vector<double> read_cell_series(std::uint64_t cell) const;
    double read_value(std::uint64_t cell, std::uint32_t timestep) const;

    const std::string& field() const { return field_; }
    const std::string& stat() const { return stat_; }
    std::uint64_t n_cells() const { return n_cells_; }
    std::uint32_t n_timesteps() const { return n_timesteps_; }

    void close();

private:
    int fd_ = -1;
    std::string field_;
    std::string stat_;
    std::uint64_t n_cells_ = 0;
    std::uint32_t n_timesteps_ = 0;
    std::uint64_t data_offset_ = 0;
};

// export.json: what was exported and the study-level audit numbers.
struct ExportSummary {
    std::string study_id;
    std::uint32_t nx = 0, ny = 0;
    std::uint32_t timesteps = 0;
    std::uint32_t n_simulations = 0;
    std::vector<double> quantile_orders;
    std::vector<double> thresholds;
    std::vector<std::string> fields;
    std::vector<std::string> stat_names;
    bool complete = false;
    bool counts_uniform = false;
    std::uint64_t crossing_violations = 0;
    std::uint64_t crossing_comparisons = 0;
    std::uint64_t applied = 0;
    std::uint64_t duplicates = 0;
    std::string kernel;

    std::uint64_t n_cells() const {
        return static_cast<std::uint64_t>(nx) * static_cast<std::uint64_t>(ny);
    }
    std::string file_for(const std::string& field, const std::string& stat) const {
        return field + "." + stat + ".fld";
    }
};

// The statistic set an export carries, derived from the study config.
// Moment statistics that are undefined at the ensemble size (variance and
// higher for fewer than two simulations) are omitted.
std::vector<field::Statistic> export_statistics(const stats::StatisticsConfig& cfg,
                                                std::uint32_t n_simulations);

// Write all statistic fields from the rank cores into export_dir.
ExportSummary export_study(const StudyConfig& cfg, std::span<RankCore* const> ranks,
                           const std::string& export_dir, bool complete);

ExportSummary read_export_summary(const std::string& export_dir);

} // namespace instat::server
