#include "instat/server/field_export.hpp"

#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <sys/stat.h>
#include <unistd.h>

#include <json.hpp>

#include "instat/bytes.hpp"
#include "instat/stats/kernels.hpp"

namespace instat::server {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint32_t kFieldMagic = 0x314C4649; // "IFL1"
constexpr std::uint16_t kFieldVersion = 1;

[[noreturn]] void throw_io(const std::string& what) {
    throw IoError(what + ": " + std::strerror(errno));
}

} // namespace

FieldExportFile::~FieldExportFile() { close(); }

FieldExportFile::FieldExportFile(FieldExportFile&& o) noexcept
    : fd_(o.fd_),
      field_(std::move(o.field_)),
      stat_(std::move(o.stat_)),
      n_cells_(o.n_cells_),
      n_timesteps_(o.n_timesteps_),
      data_offset_(o.data_offset_) {
    o.fd_ = -1;
}

FieldExportFile& FieldExportFile::operator=(FieldExportFile&& o) noexcept {
    if (this != &o) {
        close();
        fd_ = o.fd_;
        field_ = std::move(o.field_);
        stat_ = std::move(o.stat_);
        n_cells_ = o.n_cells_;
        n_timesteps_ = o.n_timesteps_;
        data_offset_ = o.data_offset_;
        o.fd_ = -1;
    }
    return *this;
}

void FieldExportFile::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

FieldExportFile FieldExportFile::create(const std::string& path, const std::string& field,
                                        const std::string& stat, std::uint64_t n_cells,
                                        std::uint32_t n_timesteps) {
    ByteWriter header;
    header.u32(kFieldMagic);
    header.u16(kFieldVersion);
    header.u16(0);
    header.u32(0); // data offset, patched below
    header.u64(n_cells);
    header.u32(n_timesteps);
    header.str(field);
    header.str(stat);
    // Align the value array to 8 bytes.
    while (header.size() % 8 != 0) header.u8(0);
    header.patch_u32(8, static_cast<std::uint32_t>(header.size()));

    const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw_io("create " + path);
    FieldExportFile f;
    f.fd_ = fd;
    f.field_ = field;
    f.stat_ = stat;
    f.n_cells_ = n_cells;
    f.n_timesteps_ = n_timesteps;
    f.data_offset_ = header.size();
    if (::pwrite(fd, header.data().data(), header.size(), 0) !=
        static_cast<ssize_t>(header.size()))
        throw_io("write header " + path);
    if (::ftruncate(fd, static_cast<off_t>(f.data_offset_ + n_cells * n_timesteps * 8)) != 0)
        throw_io("size " + path);
    return f;
}

FieldExportFile FieldExportFile::open(const std::string& path) {
    const int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) throw_io("open " + path);
    FieldExportFile f;
    f.fd_ = fd;
    std::uint8_t head[4096];
    const ssize_t got = ::pread(fd, head, sizeof head, 0);
    if (got < 24) throw IoError("field file too short: " + path);
    ByteReader r(std::span<const std::uint8_t>(head, static_cast<std::size_t>(got)));
    try {
        if (r.u32() != kFieldMagic) throw IoError("not a field export file: " + path);
        if (r.u16() != kFieldVersion) throw IoError("field file version mismatch: " + path);
        r.u16();
        f.data_offset_ = r.u32();
        f.n_cells_ = r.u64();
        f.n_timesteps_ = r.u32();
        f.field_ = r.str();
        f.stat_ = r.str();
    } catch (const ByteUnderflow&) {
        throw IoError("field file header truncated: " + path);
    }
    return f;
}

void FieldExportFile::write_cells(std::uint32_t timestep, std::uint64_t cell_begin,
                                  std::span<const double> values) {
    if (timestep >= n_timesteps_ || cell_begin + values.size() > n_cells_)
        throw IoError("field export write out of range");
    ByteWriter w;
    w.f64_array(values);
    const off_t off = static_cast<off_t>(data_offset_ +
                                         (static_cast<std::uint64_t>(timestep) * n_cells_ +
                                          cell_begin) *
                                             8);
    if (::pwrite(fd_, w.data().data(), w.size(), off) != static_cast<ssize_t>(w.size()))
        throw_io("field export write");
}

std::vector<double> FieldExportFile::read_timestep(std::uint32_t timestep) const {
    if (timestep >= n_timesteps_) throw IoError("field export read out of range");
    std::vector<std::uint8_t> raw(n_cells_ * 8);
    const off_t off =
        static_cast<off_t>(data_offset_ + static_cast<std::uint64_t>(timestep) * n_cells_ * 8);
    if (::pread(fd_, raw.data(), raw.size(), off) != static_cast<ssize_t>(raw.size()))
        throw_io("field export read");
    std::vector<double> out(n_cells_);
    ByteReader r(raw);
    r.f64_array(out);
    return out;
}

std::vector<double> FieldExportFile::read_cell_series(std::uint64_t cell) const {
    if (cell >= n_cells_) throw IoError("field export read out of range");
    std::vector<double> out(n_timesteps_);
    for (std::uint32_t t = 0; t < n_timesteps_; ++t) out[t] = read_value(cell, t);
    return out;
}

double FieldExportFile::read_value(std::uint64_t cell, std::uint32_t timestep) const {
    if (cell >= n_cells_ || timestep >= n_timesteps_)
        throw IoError("field export read out of range");
    std::uint8_t raw[8];
    const off_t off = static_cast<off_t>(
        data_offset_ + (static_cast<std::uint64_t>(timestep) * n_cells_ + cell) * 8);
    if (::pread(fd_, raw, 8, off) != 8) throw_io("field export read");
    ByteReader r(std::span<const std::uint8_t>(raw, 8));
    return r.f64();
}

std::vector<field::Statistic> export_statistics(const stats::StatisticsConfig& cfg,
                                                std::uint32_t n_simulations) {
    using field::Statistic;
    std::vector<Statistic> stats = {Statistic::mean(), Statistic::min(), Statistic::max(),
                                    Statistic::count()};
    if (n_simulations >= 2) {
        stats.insert(stats.begin() + 1,
                     {Statistic::variance(), Statistic::skewness(), Statistic::kurtosis()});
    }
    for (double t : cfg.thresholds) stats.push_back(Statistic::exceedance(t));
    for (double a : cfg.quantile_orders) stats.push_back(Statistic::quantile(a));
    return stats;
}

ExportSummary export_study(const StudyConfig& cfg, std::span<RankCore* const> ranks,
                           const std::string& export_dir, bool complete) {
    fs::create_directories(export_dir);

    ExportSummary summary;
    summary.study_id = cfg.study_id;
    summary.nx = cfg.mesh.nx;
    summary.ny = cfg.mesh.ny;
    summary.timesteps = cfg.timesteps;
    summary.n_simulations = cfg.n_simulations;
    summary.quantile_orders = cfg.statistics.quantile_orders;
    summary.thresholds = cfg.statistics.thresholds;
    summary.fields = cfg.fields;
    summary.complete = complete;
    summary.kernel = stats::kernels::active_kernel_name();

    const auto stat_list = export_statistics(cfg.statistics, cfg.n_simulations);
    for (const auto& s : stat_list) summary.stat_names.push_back(s.name());

    summary.counts_uniform = true;
    for (const RankCore* rank : ranks) {
        summary.applied += rank->applied();
        summary.duplicates += rank->duplicates();
    }

    for (const auto& field_name : cfg.fields) {
        for (const auto& stat : stat_list) {
            auto file = FieldExportFile::create(export_dir + "/" +
                                                    summary.file_for(field_name, stat.name()),
                                                field_name, stat.name(), cfg.mesh.n_cells(),
                                                cfg.timesteps);
            for (const RankCore* rank : ranks) {
                const auto& fstats = rank->field(field_name);
                for (std::uint32_t t = 0; t < cfg.timesteps; ++t) {
                    file.write_cells(t, rank->range().begin, fstats.snapshot(stat, t));
                }
            }
        }
        for (const RankCore* rank : ranks) {
            const auto& fstats = rank->field(field_name);
            for (std::uint32_t t = 0; t < cfg.timesteps; ++t) {
                const auto [viol, comp] = fstats.quantile_crossings(t);
                summary.crossing_violations += viol;
                summary.crossing_comparisons += comp;
                const auto counts = fstats.snapshot(field::Statistic::count(), t);
                for (double c : counts) {
                    if (c != static_cast<double>(cfg.n_simulations))
                        summary.counts_uniform = false;
                }
            }
        }
    }

    json j;
    j["study_id"] = summary.study_id;
    j["nx"] = summary.nx;
    j["ny"] = summary.ny;
    j["timesteps"] = summary.timesteps;
    j["n_simulations"] = summary.n_simulations;
    j["quantile_orders"] = summary.quantile_orders;
    j["thresholds"] = summary.thresholds;
    j["fields"] = summary.fields;
    j["stat_names"] = summary.stat_names;
    j["complete"] = summary.complete;
    j["counts_uniform"] = summary.counts_uniform;
    j["crossing_violations"] = summary.crossing_violations;
    j["crossing_comparisons"] = summary.crossing_comparisons;
    j["applied"] = summary.applied;
    j["duplicates"] = summary.duplicates;
    j["kernel"] = summary.kernel;
    std::ofstream out(export_dir + "/export.json");
    if (!out) throw IoError("cannot write export summary");
    out << j.dump(2) << "\n";
    return summary;
}

ExportSummary read_export_summary(const std::string& export_dir) {
    std::ifstream in(export_dir + "/export.json");
    if (!in) throw IoError("no export summary in " + export_dir);
    json j;
    try {
        in >> j;
        ExportSummary s;
        s.study_id = j.at("study_id").get<std::string>();
        s.nx = j.at("nx").get<std::uint32_t>();
        s.ny = j.at("ny").get<std::uint32_t>();
        s.timesteps = j.at("timesteps").get<std::uint32_t>();
        s.n_simulations = j.at("n_simulations").get<std::uint32_t>();
        s.quantile_orders = j.at("quantile_orders").get<std::vector<double>>();
        s.thresholds = j.at("thresholds").get<std::vector<double>>();
        s.fields = j.at("fields").get<std::vector<std::string>>();
        s.stat_names = j.at("stat_names").get<std::vector<std::string>>();
        s.complete = j.at("complete").get<bool>();
        s.counts_uniform = j.at("counts_uniform").get<bool>();
        s.crossing_violations = j.at("crossing_violations").get<std::uint64_t>();
        s.crossing_comparisons = j.at("crossing_comparisons").get<std::uint64_t>();
        s.applied = j.at("applied").get<std::uint64_t>();
        s.duplicates = j.at("duplicates").get<std::uint64_t>();
        s.kernel = j.at("kernel").get<std::string>();
        return s;
    } catch (const json::exception& e) {
        throw IoError(std::string("corrupt export summary: ") + e.what());
    }
}

} // namespace instat::server
