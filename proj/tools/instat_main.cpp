// instat: desk-scale in-transit ensemble statistics.
//
// Subcommands:
//   run-study     drive a full study (launcher + server + simulations)
//   serve         run the statistics server for one study
//   simulate      run one ensemble member and stream it to the server
//   validate      quantile-estimator calibration harness
//   probe         per-timestep quantile table at one cell
//   export-range  inter-percentile range field at one timestep
//   export-table  flatten a binary export into (cell, timestep, stat, value) rows
//   replay        deterministic canonical-order replay of applied-message logs
//   info          runtime kernel / build information

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "instat/client/session.hpp"
#include "instat/config.hpp"
#include "instat/launcher/launcher.hpp"
#include "instat/server/field_export.hpp"
#include "instat/server/replay.hpp"
#include "instat/server/server.hpp"
#include "instat/sim/dye_sim.hpp"
#include "instat/stats/kernels.hpp"
#include "instat/validation/harness.hpp"

namespace fs = std::filesystem;
using namespace instat;

namespace {

// Exit codes: 0 success, 2 configuration error, 3 study/estimation failure,
// 4 I/O error, 5 checkpoint error, 75 idle-timeout server stop.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFailure = 3;
constexpr int kExitIo = 4;
constexpr int kExitCheckpoint = 5;
constexpr int kExitIdle = 75;

std::uint64_t env_u64(const char* name, std::uint64_t fallback) {
    const char* v = std::getenv(name);
    return v ? std::strtoull(v, nullptr, 10) : fallback;
}

int cmd_run_study(const std::string& config_path, const std::string& output_override,
                  std::uint32_t sims_override, std::int64_t seed_override, bool store_raw,
                  std::uint32_t cap_override, bool force) {
    StudyConfig cfg = StudyConfig::load(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (sims_override > 0) {
        cfg.n_simulations = sims_override;
        cfg.statistics.declared_n = sims_override;
    }
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (store_raw) cfg.store_raw = true;
    if (cap_override > 0) cfg.launcher.max_concurrent = cap_override;
    cfg.validate();

    if (fs::exists(cfg.output_dir) && !fs::is_empty(cfg.output_dir)) {
        if (!force)
            throw ConfigError("output directory " + cfg.output_dir +
                              " is not empty (use --force to overwrite)");
        fs::remove_all(cfg.output_dir);
    }

    launcher::Launcher launch(cfg, cfg.output_dir);
    const launcher::StudyReport report = launch.run();
    std::printf("study %s: %s in %.1f s, retries=%u, server_restarts=%u, peak_running=%u\n",
                cfg.study_id.c_str(), report.success ? "complete" : "FAILED",
                report.wall_ms / 1000.0, report.total_retries, report.server_restarts,
                report.peak_running());
    if (!report.success) {
        std::fprintf(stderr, "failure: %s\n", report.failure_reason.c_str());
        return kExitFailure;
    }
    std::printf("export: %s\n", report.export_dir.c_str());
    return kExitOk;
}

int cmd_serve(const std::string& config_path, const std::string& study_dir, bool restore) {
    const StudyConfig cfg = StudyConfig::load(config_path);
    server::ServerOptions opts;
    opts.study_dir = study_dir;
    opts.restore = restore;
    if (const char* ep = std::getenv("INSTAT_LAUNCHER_EP"))
        opts.launcher_endpoint = proto::Endpoint::parse(ep);
    const server::ServerResult result = server::run_server(cfg, opts);
    return result.stop == server::ServerResult::Stop::complete ? kExitOk : kExitIdle;
}

int cmd_simulate(const std::string& config_path, std::uint32_t sim_id,
                 const std::string& params_arg, const std::string& endpoints_arg,
                 bool hash_only) {
    const StudyConfig cfg = StudyConfig::load(config_path);
    const launcher::ParameterSet params = params_arg.empty()
                                              ? launcher::parameter_set_for(cfg.seed, sim_id)
                                              : launcher::ParameterSet::from_arg(params_arg);
    if (!params.within_bounds()) throw ConfigError("parameters outside the prior bounds");

    if (hash_only) {
        std::printf("%016llx\n",
                    static_cast<unsigned long long>(sim::simulation_output_hash(params, cfg)));
        return kExitOk;
    }

    std::string endpoints_csv = endpoints_arg;
    if (endpoints_csv.empty()) {
        const char* env = std::getenv("INSTAT_ENDPOINTS");
        if (!env) throw ConfigError("no server endpoints (flag --endpoints or INSTAT_ENDPOINTS)");
        endpoints_csv = env;
    }
    std::vector<proto::Endpoint> endpoints;
    std::size_t pos = 0;
    while (pos != std::string::npos) {
        const std::size_t comma = endpoints_csv.find(',', pos);
        const std::string item = endpoints_csv.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!item.empty()) endpoints.push_back(proto::Endpoint::parse(item));
        pos = comma == std::string::npos ? std::string::npos : comma + 1;
    }

    const std::uint64_t attempt = env_u64("INSTAT_ATTEMPT", 0);
    const std::uint64_t crash_step = env_u64("INSTAT_CRASH_AT_STEP", UINT64_MAX);
    const std::uint64_t crash_attempts = env_u64("INSTAT_CRASH_ATTEMPTS", 0);

    auto session = client::ClientSession::initialize(
        sim_id, cfg.study_id, {{cfg.fields.front(), CellRange{0, cfg.mesh.n_cells()}}},
        endpoints, cfg.mesh.n_cells());

    const auto step_delay =
        std::chrono::microseconds(cfg.simulation.delay_ms * 1000ull / cfg.timesteps);
    sim::run_simulation(params, cfg, [&](std::uint32_t t, std::span<const double> field) {
        if (attempt < crash_attempts && t == crash_step) {
            std::fprintf(stderr, "[sim %u] injected crash before timestep %u\n", sim_id, t);
            std::_Exit(70);
        }
        if (step_delay.count() > 0) std::this_thread::sleep_for(step_delay);
        session.send(t, cfg.fields.front(), field);
    });
    session.finalize();
    return kExitOk;
}

void print_summary_row(std::FILE* out, const char* dist, const std::string& label,
                       double exact, const validation::Summary& s) {
    std::fprintf(out, "%-12s %-12s %10.4f %10.4f %10.4f %10.4f [%8.4f, %8.4f]\n", dist,
                 label.c_str(), exact, s.bias, s.std_dev, s.rmse, s.band_lo, s.band_hi);
}

int cmd_validate(const std::string& dist_arg, bool all_dists, double alpha, std::uint64_t n,
                 std::uint32_t repeats, std::uint64_t seed, bool include_gamma06,
                 const std::string& csv_path, const std::string& raw_path) {
    std::vector<validation::TargetDist> dists;
    if (all_dists) {
        for (auto d : validation::all_distributions()) dists.push_back(d);
    } else {
        dists.push_back(validation::parse_dist(dist_arg));
    }

    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path);
        if (!csv) throw IoError("cannot write " + csv_path);
        csv << "dist,estimator,alpha,n,repeats,exact,bias,std,rmse,band_lo,band_hi\n";
    }
    std::ofstream raw;
    if (!raw_path.empty()) {
        raw.open(raw_path);
        if (!raw) throw IoError("cannot write " + raw_path);
        raw << "dist,estimator,repetition,estimate\n";
    }

    std::printf("%-12s %-12s %10s %10s %10s %10s %s\n", "dist", "estimator", "exact", "bias",
                "std", "rmse", "band[5%,95%]");

    // RMSE per (dist, estimator) for the robustness verdict.
    std::vector<std::vector<double>> rmse_table;
    std::vector<validation::EstimatorSpec> estimators;

    for (const auto dist : dists) {
        const auto study =
            validation::run_distribution_study(dist, alpha, n, repeats, seed, include_gamma06);
        estimators = study.estimators;
        std::vector<double> rmse_row;
        for (std::size_t e = 0; e < study.estimators.size(); ++e) {
            const auto s = validation::summarize(study.finals[e], study.exact);
            rmse_row.push_back(s.rmse);
            print_summary_row(stdout, validation::dist_name(dist),
                              study.estimators[e].label(), study.exact, s);
            if (csv.is_open()) {
                csv << validation::dist_name(dist) << ',' << study.estimators[e].label() << ','
                    << alpha << ',' << n << ',' << repeats << ',' << study.exact << ','
                    << s.bias << ',' << s.std_dev << ',' << s.rmse << ',' << s.band_lo << ','
                    << s.band_hi << "\n";
            }
            if (raw.is_open()) {
                for (std::size_t r = 0; r < study.finals[e].size(); ++r)
                    raw << validation::dist_name(dist) << ',' << study.estimators[e].label()
                        << ',' << r << ',' << study.finals[e][r] << "\n";
            }
        }
        rmse_table.push_back(std::move(rmse_row));
    }

    if (all_dists) {
        // An estimator is robust when its RMSE stays within twice the
        // empirical estimator's RMSE on every distribution.
        std::printf("\nrobustness (RMSE <= 2x empirical on all %zu distributions):\n",
                    dists.size());
        bool linear_robust = false;
        bool any_constant_robust = false;
        for (std::size_t e = 1; e < estimators.size(); ++e) {
            bool robust = true;
            for (std::size_t d = 0; d < dists.size(); ++d)
                robust = robust && rmse_table[d][e] <= 2.0 * rmse_table[d][0];
            std::printf("  %-12s %s\n", estimators[e].label().c_str(),
                        robust ? "robust" : "not robust");
            if (estimators[e].kind == validation::EstimatorSpec::Kind::rm_linear)
                linear_robust = robust;
            else if (estimators[e].kind == validation::EstimatorSpec::Kind::rm_constant &&
                     (estimators[e].gamma == 0.5 || estimators[e].gamma == 0.7 ||
                      estimators[e].gamma == 0.9))
                any_constant_robust = any_constant_robust || robust;
        }
        std::printf("verdict: linear profile %s; %s\n",
                    linear_robust ? "robust" : "NOT robust",
                    any_constant_robust ? "some constant gamma is also robust"
                                        : "no constant gamma is robust on all");
        return linear_robust ? kExitOk : kExitFailure;
    }
    return kExitOk;
}

int cmd_probe(const std::string& export_dir, std::uint64_t cell, const std::string& field_arg,
              const std::string& out_path) {
    const auto summary = server::read_export_summary(export_dir);
    const std::string field = field_arg.empty() ? summary.fields.front() : field_arg;
    if (!summary.complete) throw ConfigError("export is incomplete; probe needs a full study");
    if (cell >= summary.n_cells()) throw ConfigError("cell index outside the mesh");

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        file.open(out_path);
        if (!file) throw IoError("cannot write " + out_path);
        out = &file;
    }

    std::vector<server::FieldExportFile> files;
    for (double a : summary.quantile_orders) {
        files.push_back(server::FieldExportFile::open(
            export_dir + "/" + summary.file_for(field, field::Statistic::quantile(a).name())));
    }
    (*out) << "timestep,alpha,value\n";
    std::uint64_t inversions = 0;
    for (std::uint32_t t = 0; t < summary.timesteps; ++t) {
        double prev = 0.0;
        for (std::size_t a = 0; a < summary.quantile_orders.size(); ++a) {
            const double v = files[a].read_value(cell, t);
            (*out) << t << ',' << summary.quantile_orders[a] << ',' << v << "\n";
            if (a > 0 && v < prev) ++inversions;
            prev = v;
        }
    }
    if (inversions > 0)
        std::fprintf(stderr, "note: %llu quantile-order inversions at this cell\n",
                     static_cast<unsigned long long>(inversions));
    return kExitOk;
}

int cmd_export_range(const std::string& export_dir, double lower, double upper,
                     std::uint32_t timestep, const std::string& field_arg,
                     const std::string& out_path) {
    const auto summary = server::read_export_summary(export_dir);
    const std::string field = field_arg.empty() ? summary.fields.front() : field_arg;
    const auto has_alpha = [&](double a) {
        for (double q : summary.quantile_orders)
            if (q == a) return true;
        return false;
    };
    if (!has_alpha(lower) || !has_alpha(upper))
        throw ConfigError("requested quantile orders were not part of the export");
    if (timestep >= summary.timesteps) throw ConfigError("timestep outside the export");

    auto lo_file = server::FieldExportFile::open(
        export_dir + "/" + summary.file_for(field, field::Statistic::quantile(lower).name()));
    auto hi_file = server::FieldExportFile::open(
        export_dir + "/" + summary.file_for(field, field::Statistic::quantile(upper).name()));
    const auto lo = lo_file.read_timestep(timestep);
    const auto hi = hi_file.read_timestep(timestep);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        file.open(out_path);
        if (!file) throw IoError("cannot write " + out_path);
        out = &file;
    }
    (*out) << "cell,range\n";
    for (std::size_t c = 0; c < lo.size(); ++c) {
        const double d = hi[c] - lo[c];
        (*out) << c << ',' << (d < 0.0 ? 0.0 : d) << "\n";
    }
    return kExitOk;
}

int cmd_export_table(const std::string& export_dir, const std::string& out_path) {
    const auto summary = server::read_export_summary(export_dir);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        file.open(out_path);
        if (!file) throw IoError("cannot write " + out_path);
        out = &file;
    }
    (*out) << "cell,timestep,statistic,value\n";
    for (const auto& field : summary.fields) {
        for (const auto& stat : summary.stat_names) {
            auto f = server::FieldExportFile::open(export_dir + "/" +
                                                   summary.file_for(field, stat));
            for (std::uint32_t t = 0; t < summary.timesteps; ++t) {
                const auto row = f.read_timestep(t);
                for (std::size_t c = 0; c < row.size(); ++c)
                    (*out) << c << ',' << t << ',' << stat << ',' << row[c] << "\n";
            }
        }
    }
    return kExitOk;
}

int cmd_replay(const std::string& config_path, const std::string& log_dir,
               const std::string& out_dir) {
    const StudyConfig cfg = StudyConfig::load(config_path);
    const auto result = server::replay_message_logs(cfg, log_dir, out_dir);
    std::printf("replayed %llu messages (%llu duplicates), %s\n",
                static_cast<unsigned long long>(result.applied),
                static_cast<unsigned long long>(result.duplicates),
                result.complete ? "complete" : "INCOMPLETE");
    return result.complete ? kExitOk : kExitFailure;
}

int cmd_info() {
    std::printf("kernels: active=%s avx2_supported=%s\n",
                stats::kernels::active_kernel_name().c_str(),
                stats::kernels::avx2_supported() ? "yes" : "no");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"in-transit ensemble statistics"};
    app.require_subcommand(1);
    int rc = kExitOk;

    // run-study
    std::string rs_config, rs_output;
    std::uint32_t rs_sims = 0, rs_cap = 0;
    std::int64_t rs_seed = -1;
    bool rs_store_raw = false, rs_force = false;
    auto* run_study = app.add_subcommand("run-study", "run a full ensemble study");
    run_study->add_option("--config", rs_config, "study config file")->required();
    run_study->add_option("--output", rs_output, "output directory override");
    run_study->add_option("--sims", rs_sims, "number of simulations override");
    run_study->add_option("--seed", rs_seed, "seed override");
    run_study->add_option("--cap", rs_cap, "concurrency cap override");
    run_study->add_flag("--store-raw", rs_store_raw,
                        "log applied messages (raw samples) for oracle checks");
    run_study->add_flag("--force", rs_force, "wipe a non-empty output directory");
    run_study->callback([&] {
        rc = cmd_run_study(rs_config, rs_output, rs_sims, rs_seed, rs_store_raw, rs_cap,
                           rs_force);
    });

    // serve
    std::string sv_config, sv_dir;
    bool sv_restore = false;
    auto* serve = app.add_subcommand("serve", "run the statistics server");
    serve->add_option("--config", sv_config, "study config file")->required();
    serve->add_option("--study-dir", sv_dir, "study directory")->required();
    serve->add_flag("--restore", sv_restore, "restore from the latest checkpoint");
    serve->callback([&] { rc = cmd_serve(sv_config, sv_dir, sv_restore); });

    // simulate
    std::string sm_config, sm_params, sm_endpoints;
    std::uint32_t sm_id = 0;
    bool sm_hash_only = false;
    auto* simulate = app.add_subcommand("simulate", "run one ensemble member");
    simulate->add_option("--config", sm_config, "study config file")->required();
    simulate->add_option("--sim-id", sm_id, "simulation id")->required();
    simulate->add_option("--params", sm_params, "comma-separated parameter set");
    simulate->add_option("--endpoints", sm_endpoints, "server endpoints host:port,...");
    simulate->add_flag("--hash-only", sm_hash_only, "print the output hash, send nothing");
    simulate->callback(
        [&] { rc = cmd_simulate(sm_config, sm_id, sm_params, sm_endpoints, sm_hash_only); });

    // validate
    std::string va_dist = "gaussian", va_csv, va_raw;
    bool va_all = false, va_g06 = false;
    double va_alpha = 0.95;
    std::uint64_t va_n = 1000, va_seed = 42;
    std::uint32_t va_repeats = 200;
    auto* validate = app.add_subcommand("validate", "estimator calibration harness");
    validate->add_option("--dist", va_dist, "gaussian|uniform|triangular|exponential");
    validate->add_flag("--all-dists", va_all, "run every distribution and the verdict");
    validate->add_option("--alpha", va_alpha, "quantile order");
    validate->add_option("--n", va_n, "sample size per repetition");
    validate->add_option("--repeats", va_repeats, "repetitions");
    validate->add_option("--seed", va_seed, "seed");
    validate->add_flag("--include-gamma06", va_g06, "add the gamma=0.6 estimator");
    validate->add_option("--out", va_csv, "summary CSV path");
    validate->add_option("--raw-out", va_raw, "raw estimates CSV path");
    validate->callback([&] {
        rc = cmd_validate(va_dist, va_all, va_alpha, va_n, va_repeats, va_seed, va_g06, va_csv,
                          va_raw);
    });

    // probe
    std::string pr_dir, pr_field, pr_out;
    std::uint64_t pr_cell = 0;
    auto* probe = app.add_subcommand("probe", "quantile time series at one cell");
    probe->add_option("--export-dir", pr_dir, "export directory")->required();
    probe->add_option("--cell", pr_cell, "global cell index")->required();
    probe->add_option("--field", pr_field, "field name (default: first)");
    probe->add_option("--out", pr_out, "output CSV ('-' = stdout)");
    probe->callback([&] { rc = cmd_probe(pr_dir, pr_cell, pr_field, pr_out); });

    // export-range
    std::string er_dir, er_field, er_out;
    double er_lower = 0.25, er_upper = 0.75;
    std::uint32_t er_t = 0;
    auto* range = app.add_subcommand("export-range", "inter-percentile range field");
    range->add_option("--export-dir", er_dir, "export directory")->required();
    range->add_option("--lower", er_lower, "lower quantile order")->required();
    range->add_option("--upper", er_upper, "upper quantile order")->required();
    range->add_option("--timestep", er_t, "timestep")->required();
    range->add_option("--field", er_field, "field name (default: first)");
    range->add_option("--out", er_out, "output CSV ('-' = stdout)");
    range->callback(
        [&] { rc = cmd_export_range(er_dir, er_lower, er_upper, er_t, er_field, er_out); });

    // export-table
    std::string et_dir, et_out;
    auto* table = app.add_subcommand("export-table", "flatten an export to CSV");
    table->add_option("--export-dir", et_dir, "export directory")->required();
    table->add_option("--out", et_out, "output CSV ('-' = stdout)");
    table->callback([&] { rc = cmd_export_table(et_dir, et_out); });

    // replay
    std::string rp_config, rp_log, rp_out;
    auto* replay = app.add_subcommand("replay", "canonical replay of message logs");
    replay->add_option("--config", rp_config, "study config file")->required();
    replay->add_option("--log", rp_log, "message log directory")->required();
    replay->add_option("--out", rp_out, "export output directory")->required();
    replay->callback([&] { rc = cmd_replay(rp_config, rp_log, rp_out); });

    auto* info = app.add_subcommand("info", "runtime information");
    info->callback([&] { rc = cmd_info(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "checkpoint error: %s\n", e.what());
        return kExitCheckpoint;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return rc;
}
