// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line. Run all with no arguments or one with
// --criterion N. Exit code 0 only if every requested criterion passed.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "instat/client/session.hpp"
#include "instat/launcher/launcher.hpp"
#include "instat/launcher/process.hpp"
#include "instat/normal.hpp"
#include "instat/proto/codec.hpp"
#include "instat/rng.hpp"
#include "instat/server/checkpoint.hpp"
#include "instat/server/field_export.hpp"
#include "instat/server/rank_core.hpp"
#include "instat/server/replay.hpp"
#include "instat/stats/kernels.hpp"
#include "instat/stats/moments.hpp"
#include "instat/validation/harness.hpp"

using namespace instat;
namespace fs = std::filesystem;
using SteadyClock = std::chrono::steady_clock;

namespace {

double elapsed_s(SteadyClock::time_point t0) {
    return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

struct CriterionResult {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Criteria 1 and 2: estimator calibration and robustness ordering.
// N=1000, alpha=0.95, 200 repetitions, four target distributions.
// ---------------------------------------------------------------------------

struct CalibrationData {
    std::vector<validation::TargetDist> dists;
    std::vector<std::vector<double>> rmse; // [dist][estimator]
    std::vector<bool> c1_bias_ok, c1_rmse_ok;
    std::vector<std::string> lines;
};

CalibrationData run_calibration() {
    CalibrationData out;
    const double alpha = 0.95;
    const std::uint64_t n = 1000;
    const std::uint32_t repeats = 200;

    for (auto dist : validation::all_distributions()) {
        const auto study = validation::run_distribution_study(dist, alpha, n, repeats, 42);
        std::vector<double> rmse_row;
        validation::Summary emp{}, linear{};
        for (std::size_t e = 0; e < study.estimators.size(); ++e) {
            const auto s = validation::summarize(study.finals[e], study.exact);
            rmse_row.push_back(s.rmse);
            if (study.estimators[e].kind == validation::EstimatorSpec::Kind::empirical)
                emp = s;
            if (study.estimators[e].kind == validation::EstimatorSpec::Kind::rm_linear)
                linear = s;
        }
        const double idr = validation::exact_quantile(dist, 0.9) -
                           validation::exact_quantile(dist, 0.1);
        const double bias_bound = 3.0 * emp.std_dev / std::sqrt(double(repeats)) + 0.05 * idr;
        out.dists.push_back(dist);
        out.rmse.push_back(rmse_row);
        out.c1_bias_ok.push_back(std::fabs(linear.bias) <= bias_bound);
        out.c1_rmse_ok.push_back(linear.rmse <= 2.0 * emp.rmse);
        char line[256];
        std::snprintf(line, sizeof line,
                      "%s: |bias|=%.4f (bound %.4f), rmse=%.4f (bound %.4f)",
                      validation::dist_name(dist), std::fabs(linear.bias), bias_bound,
                      linear.rmse, 2.0 * emp.rmse);
        out.lines.push_back(line);
    }
    return out;
}

CriterionResult criterion_1() {
    const auto data = run_calibration();
    bool pass = true;
    std::string detail;
    for (std::size_t d = 0; d < data.dists.size(); ++d) {
        pass = pass && data.c1_bias_ok[d] && data.c1_rmse_ok[d];
        detail += (d ? "; " : "") + data.lines[d];
    }
    return {pass, detail};
}

CriterionResult criterion_2() {
    const auto data = run_calibration();
    // estimator order: empirical, g0.5, g0.7, g0.9, linear
    const auto robust = [&](std::size_t est) {
        for (std::size_t d = 0; d < data.rmse.size(); ++d) {
            if (data.rmse[d][est] > 2.0 * data.rmse[d][0]) return false;
        }
        return true;
    };
    const bool g05 = robust(1), g07 = robust(2), g09 = robust(3), lin = robust(4);
    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "robust-on-all-four: g0.5=%d g0.7=%d g0.9=%d linear=%d", g05, g07, g09, lin);
    return {!g05 && !g07 && !g09 && lin, detail};
}

// ---------------------------------------------------------------------------
// Criterion 3: one-pass moment fidelity on 1e5 samples per cell, 4 cells.
// ---------------------------------------------------------------------------

CriterionResult criterion_3() {
    const std::uint64_t n_cells = 4;
    const std::uint32_t n_samples = 100000;
    auto cfg = std::make_shared<stats::StatisticsConfig>();
    cfg->quantile_orders = {0.5};
    cfg->thresholds = {0.6};
    cfg->declared_n = n_samples;
    field::FieldStatistics fs("toy", {0, n_cells}, 1, cfg);

    CounterRng rng(777, 0);
    std::uint64_t ctr = 0;
    std::vector<std::vector<double>> stored(n_cells);
    std::vector<double> chunk(n_cells);
    for (std::uint32_t k = 0; k < n_samples; ++k) {
        for (std::uint64_t c = 0; c < n_cells; ++c) {
            // Different shapes per cell: uniform, cubed, heavy-tailed, bimodal.
            const double u = rng.uniform(ctr++);
            double v = 0.0;
            switch (c) {
            case 0: v = u; break;
            case 1: v = u * u * u; break;
            case 2: v = std::exp(2.0 * u) - 1.0; break;
            default: v = (k % 2 == 0) ? u : 3.0 + u; break;
            }
            chunk[c] = v;
            stored[c].push_back(v);
        }
        fs.ingest_chunk(0, 0, chunk);
    }

    const auto mean = fs.snapshot(field::Statistic::mean(), 0);
    const auto var = fs.snapshot(field::Statistic::variance(), 0);
    const auto skew = fs.snapshot(field::Statistic::skewness(), 0);
    const auto kurt = fs.snapshot(field::Statistic::kurtosis(), 0);
    const auto mn = fs.snapshot(field::Statistic::min(), 0);
    const auto mx = fs.snapshot(field::Statistic::max(), 0);
    const auto exc = fs.snapshot(field::Statistic::exceedance(0.6), 0);

    double worst = 0.0;
    for (std::uint64_t c = 0; c < n_cells; ++c) {
        double sum = 0.0;
        for (double v : stored[c]) sum += v;
        const double m = sum / n_samples;
        double m2 = 0, m3 = 0, m4 = 0, lo = stored[c][0], hi = stored[c][0];
        std::uint64_t over = 0;
        for (double v : stored[c]) {
            const double d = v - m;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            over += v > 0.6 ? 1 : 0;
        }
        const double nn = n_samples;
        const auto rel = [](double got, double want) {
            return std::fabs(got - want) / std::max(std::fabs(want), 1e-30);
        };
        worst = std::max(worst, rel(mean[c], m));
        worst = std::max(worst, rel(var[c], m2 / (nn - 1)));
        worst = std::max(worst, rel(skew[c], std::sqrt(nn) * m3 / std::pow(m2, 1.5)));
        worst = std::max(worst, rel(kurt[c], nn * m4 / (m2 * m2) - 3.0));
        worst = std::max(worst, rel(mn[c], lo));
        worst = std::max(worst, rel(mx[c], hi));
        worst = std::max(worst, rel(exc[c], double(over) / nn));
    }
    char detail[128];
    std::snprintf(detail, sizeof detail, "max relative error %.3e (bound 1e-9), kernels=%s",
                  worst, stats::kernels::active_kernel_name().c_str());
    return {worst <= 1e-9, detail};
}

// ---------------------------------------------------------------------------
// Shared machinery for criteria 4 and 8: stored-sample oracle with a
// bootstrap tolerance for the streamed quantile estimates.
// ---------------------------------------------------------------------------

struct RawStore {
    std::uint64_t n_cells = 0;
    std::uint32_t n_t = 0;
    std::uint32_t n_sims = 0;
    std::vector<double> samples; // [position][sim], position = cell * n_t + t
    bool counts_ok = true;
};

RawStore load_raw(const StudyConfig& cfg, const std::string& msglog_dir) {
    RawStore store;
    store.n_cells = cfg.mesh.n_cells();
    store.n_t = cfg.timesteps;
    store.n_sims = cfg.n_simulations;
    store.samples.assign(static_cast<std::size_t>(store.n_cells) * store.n_t * store.n_sims,
                         0.0);
    std::vector<std::uint32_t> fill(store.n_cells * store.n_t, 0);

    for (std::uint32_t r = 0; r < cfg.server.ranks; ++r) {
        const auto messages =
            server::read_message_log(msglog_dir + "/rank_" + std::to_string(r) + ".log");
        for (const auto& m : messages) {
            for (std::size_t i = 0; i < m.values.size(); ++i) {
                const std::uint64_t pos = (m.cell_offset + i) * store.n_t + m.timestep;
                store.samples[pos * store.n_sims + m.simulation_id] = m.values[i];
                fill[pos]++;
            }
        }
    }
    for (std::uint32_t c : fill) store.counts_ok = store.counts_ok && c == store.n_sims;
    return store;
}

// Bootstrap ranks shared across positions: ranks[b][a] is the 1-based order
// statistic the alpha-quantile of resample b falls on. The rank law depends
// only on (N, alpha), never on the sample values, so one draw serves every
// position.
std::vector<std::vector<std::uint32_t>> bootstrap_ranks(std::uint32_t n,
                                                        std::span<const double> alphas,
                                                        std::uint32_t reps,
                                                        std::uint64_t seed) {
    std::vector<std::vector<std::uint32_t>> ranks(reps,
                                                  std::vector<std::uint32_t>(alphas.size()));
    CounterRng rng(seed, 0);
    std::uint64_t ctr = 0;
    std::vector<std::uint32_t> hist(n);
    for (std::uint32_t b = 0; b < reps; ++b) {
        std::fill(hist.begin(), hist.end(), 0);
        for (std::uint32_t i = 0; i < n; ++i) hist[rng.below(ctr++, n)]++;
        std::uint32_t cum = 0, idx = 0;
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            std::uint32_t want =
                static_cast<std::uint32_t>(std::floor(alphas[a] * double(n))) + 1;
            if (want > n) want = n;
            while (idx < n && cum < want) cum += hist[idx++];
            ranks[b][a] = idx;
        }
    }
    return ranks;
}

struct MadCheck {
    bool pass = true;
    std::string detail;
};

// Per alpha: median over all (cell, timestep) positions of |rm - empirical|
// against 1.5x the median per-position bootstrap standard error at N.
MadCheck check_quantiles_against_oracle(const StudyConfig& cfg, const std::string& msglog_dir,
                                        const std::string& export_dir) {
    MadCheck out;
    const RawStore store = load_raw(cfg, msglog_dir);
    if (!store.counts_ok) return {false, "raw store incomplete"};

    const auto& alphas = cfg.statistics.quantile_orders;
    const std::uint32_t reps = 500;
    const auto ranks = bootstrap_ranks(store.n_sims, alphas, reps, 2026);

    const auto summary = server::read_export_summary(export_dir);
    std::vector<std::vector<double>> rm(alphas.size());
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        auto file = server::FieldExportFile::open(
            export_dir + "/" +
            summary.file_for(cfg.fields.front(),
                             field::Statistic::quantile(alphas[a]).name()));
        rm[a].resize(store.n_cells * store.n_t);
        for (std::uint32_t t = 0; t < store.n_t; ++t) {
            const auto row = file.read_timestep(t);
            for (std::uint64_t c = 0; c < store.n_cells; ++c)
                rm[a][c * store.n_t + t] = row[c];
        }
    }

    const std::uint64_t n_pos = store.n_cells * store.n_t;
    std::vector<std::vector<double>> dev(alphas.size(), std::vector<double>(n_pos));
    std::vector<std::vector<double>> se(alphas.size(), std::vector<double>(n_pos));

    const unsigned n_threads = std::max(2u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    std::atomic<std::uint64_t> next{0};
    for (unsigned w = 0; w < n_threads; ++w) {
        pool.emplace_back([&] {
            std::vector<double> sorted(store.n_sims);
            for (;;) {
                const std::uint64_t begin = next.fetch_add(256);
                if (begin >= n_pos) break;
                const std::uint64_t end = std::min(begin + 256, n_pos);
                for (std::uint64_t p = begin; p < end; ++p) {
                    const double* s = store.samples.data() + p * store.n_sims;
                    std::copy(s, s + store.n_sims, sorted.begin());
                    std::sort(sorted.begin(), sorted.end());
                    for (std::size_t a = 0; a < alphas.size(); ++a) {
                        std::uint32_t rank = static_cast<std::uint32_t>(std::floor(
                                                 alphas[a] * double(store.n_sims))) +
                                             1;
                        if (rank > store.n_sims) rank = store.n_sims;
                        const double emp = sorted[rank - 1];
                        dev[a][p] = std::fabs(rm[a][p] - emp);
                        double sum = 0.0, sum2 = 0.0;
                        for (std::uint32_t b = 0; b < reps; ++b) {
                            const double v = sorted[ranks[b][a] - 1];
                            sum += v;
                            sum2 += v * v;
                        }
                        const double mean_b = sum / reps;
                        const double var_b =
                            std::max(0.0, (sum2 - reps * mean_b * mean_b) / (reps - 1.0));
                        se[a][p] = std::sqrt(var_b);
                    }
                }
            }
        });
    }
    for (auto& t : pool) t.join();

    const auto median = [](std::vector<double>& v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        const double mad = median(dev[a]);
        const double se_med = median(se[a]);
        char buf[128];
        std::snprintf(buf, sizeof buf, "%salpha %.2f: mad=%.5f vs 1.5*se=%.5f",
                      a == 0 ? "" : "; ", alphas[a], mad, 1.5 * se_med);
        out.detail += buf;
        out.pass = out.pass && mad <= 1.5 * se_med;
    }
    return out;
}

StudyConfig desk_study_config(const std::string& id, const std::string& out_dir) {
    StudyConfig cfg;
    cfg.study_id = id;
    cfg.mesh = {64, 32};
    cfg.timesteps = 100;
    cfg.fields = {"dye"};
    cfg.n_simulations = 200;
    cfg.seed = 42;
    cfg.statistics.quantile_orders = {0.05, 0.25, 0.5, 0.75, 0.95};
    cfg.statistics.thresholds = {0.25};
    cfg.statistics.declared_n = 200;
    cfg.server.ranks = 2;
    cfg.server.checkpoint_period_ms = 10000;
    cfg.server.idle_timeout_ms = 60000;
    cfg.server.heartbeat_period_ms = 500;
    cfg.launcher.max_concurrent = 8;
    cfg.launcher.retry_budget = 2;
    cfg.launcher.heartbeat_timeout_ms = 5000;
    cfg.launcher.poll_period_ms = 10;
    cfg.launcher.sim_wall_limit_ms = 60000;
    cfg.simulation.domain_x = 2.0;
    cfg.simulation.domain_y = 1.0;
    cfg.simulation.dt = 0.001;
    cfg.simulation.diffusivity = 0.002;
    cfg.simulation.inflow_speed = 28.0;
    cfg.store_raw = true;
    cfg.output_dir = out_dir;
    return cfg;
}

CriterionResult criterion_4() {
    const auto t0 = SteadyClock::now();
    const std::string dir = "/tmp/instat_accept4";
    fs::remove_all(dir);
    auto cfg = desk_study_config("accept4", dir);

    launcher::Launcher launch(cfg, dir);
    const auto report = launch.run();
    if (!report.success) return {false, "study failed: " + report.failure_reason};

    const auto summary = server::read_export_summary(dir + "/export");
    if (!summary.counts_uniform || summary.applied != 200ull * 2 * 100)
        return {false, "per-cell counts are not uniformly 200"};

    auto counts = server::FieldExportFile::open(dir + "/export/" +
                                                summary.file_for("dye", "count"));
    for (std::uint32_t t = 0; t < cfg.timesteps; ++t) {
        for (double v : counts.read_timestep(t)) {
            if (v != 200.0) return {false, "count field not exactly 200 everywhere"};
        }
    }

    auto mad = check_quantiles_against_oracle(cfg, dir + "/msglog", dir + "/export");
    char timing[96];
    std::snprintf(timing, sizeof timing, "; counts all exactly 200; study+oracle %.1f s",
                  elapsed_s(t0));
    mad.detail += timing;
    if (elapsed_s(t0) > 600.0) return {false, "runtime budget exceeded: " + mad.detail};
    if (mad.pass) fs::remove_all(dir);
    return {mad.pass, mad.detail};
}

// ---------------------------------------------------------------------------
// Criterion 5: fault tolerance.
// ---------------------------------------------------------------------------

StudyConfig fault_study_config(const std::string& id, const std::string& out_dir,
                               std::uint32_t sims) {
    StudyConfig cfg;
    cfg.study_id = id;
    cfg.mesh = {16, 8};
    cfg.timesteps = 10;
    cfg.n_simulations = sims;
    cfg.seed = 7;
    cfg.statistics.quantile_orders = {0.25, 0.5, 0.75};
    cfg.statistics.thresholds = {0.2};
    cfg.statistics.declared_n = sims;
    cfg.server.ranks = 2;
    cfg.server.checkpoint_period_ms = 400;
    cfg.server.idle_timeout_ms = 20000;
    cfg.server.heartbeat_period_ms = 200;
    cfg.launcher.max_concurrent = 6;
    cfg.launcher.retry_budget = 2;
    cfg.launcher.heartbeat_timeout_ms = 1500;
    cfg.launcher.poll_period_ms = 10;
    cfg.launcher.sim_wall_limit_ms = 60000;
    cfg.simulation.inflow_speed = 9.0;
    cfg.simulation.dt = 0.004;
    cfg.simulation.diffusivity = 0.002;
    cfg.simulation.delay_ms = 120;
    cfg.output_dir = out_dir;
    return cfg;
}

bool counts_all_equal(const std::string& export_dir, const std::string& field, double want,
                      std::string& err) {
    const auto summary = server::read_export_summary(export_dir);
    auto counts =
        server::FieldExportFile::open(export_dir + "/" + summary.file_for(field, "count"));
    for (std::uint32_t t = 0; t < summary.timesteps; ++t) {
        for (double v : counts.read_timestep(t)) {
            if (v != want) {
                err = "count " + std::to_string(v) + " != " + std::to_string(want);
                return false;
            }
        }
    }
    return true;
}

CriterionResult criterion_5a() {
    const std::string dir = "/tmp/instat_accept5a";
    fs::remove_all(dir);
    auto cfg = fault_study_config("accept5a", dir, 50);
    // Three simulations die mid-send on their first attempt.
    cfg.fault_sims = {{7, 4, 1}, {23, 6, 1}, {41, 2, 1}};

    launcher::Launcher launch(cfg, dir);
    const auto report = launch.run();
    if (!report.success) return {false, "study failed: " + report.failure_reason};
    std::string err;
    if (!counts_all_equal(dir + "/export", "dye", 50.0, err)) return {false, err};
    const auto summary = server::read_export_summary(dir + "/export");
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "3 killed sims retried (%u retries), counts all 50, %llu duplicates dropped",
                  report.total_retries, static_cast<unsigned long long>(summary.duplicates));
    const bool pass = report.total_retries >= 3 && summary.duplicates > 0;
    if (pass) fs::remove_all(dir);
    return {pass, detail};
}

CriterionResult criterion_5b() {
    const std::string dir = "/tmp/instat_accept5b";
    fs::remove_all(dir);
    auto cfg = fault_study_config("accept5b", dir, 50);

    bool killed = false;
    int done = 0;
    launcher::LaunchHooks hooks;
    hooks.on_event = [&](launcher::Launcher& l, const launcher::StudyEvent& ev) {
        if (!killed && ev.type == launcher::StudyEvent::Type::sim_exit && ev.code == 0) {
            if (++done == 20) {
                killed = true;
                l.kill_server_now();
            }
        }
    };
    launcher::Launcher launch(cfg, dir, hooks);
    const auto report = launch.run();
    if (!report.success) return {false, "study failed: " + report.failure_reason};
    if (!killed || report.server_restarts != 1)
        return {false, "server kill/restart did not happen as scripted"};

    std::string err;
    if (!counts_all_equal(dir + "/export", "dye", 50.0, err)) return {false, err};
    const auto summary = server::read_export_summary(dir + "/export");
    // Exactly-once across the restart: every expected ledger key applied
    // exactly once; uniform counts of 50 rule out double application.
    const bool exact = summary.applied == 50ull * 2 * 10 && summary.counts_uniform;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "server killed+restored, counts all 50, applied=%llu, duplicates=%llu",
                  static_cast<unsigned long long>(summary.applied),
                  static_cast<unsigned long long>(summary.duplicates));
    if (exact) fs::remove_all(dir);
    return {exact, detail};
}

CriterionResult criterion_5c() {
    const char* bin = std::getenv("INSTAT_BIN");
    if (!bin) return {false, "INSTAT_BIN not set"};
    const std::string dir = "/tmp/instat_accept5c";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto cfg = fault_study_config("accept5c", dir + "/run", 12);
    cfg.simulation.delay_ms = 400;
    cfg.server.idle_timeout_ms = 2500;
    cfg.launcher.max_concurrent = 4;
    cfg.save(dir + "/study.json");

    launcher::ProcessRunner procs;
    const pid_t launcher_pid =
        procs.spawn({bin, "run-study", "--config", dir + "/study.json"}, {});

    std::set<int> started;
    const auto parse_events = [&] {
        std::ifstream in(dir + "/run/events.log");
        std::string line;
        started.clear();
        while (std::getline(in, line)) {
            std::int64_t t_ms;
            std::string type;
            int sim, code;
            std::istringstream ss(line);
            if (!(ss >> t_ms >> type >> sim >> code)) continue;
            if (type == "sim_start") started.insert(sim);
        }
    };
    const auto t0 = SteadyClock::now();
    for (;;) {
        parse_events();
        if (started.size() >= 3) break;
        if (elapsed_s(t0) > 60.0) {
            procs.kill(launcher_pid, SIGKILL);
            return {false, "study never started simulations"};
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    procs.kill(launcher_pid, SIGKILL);
    procs.wait_for(launcher_pid, 2000);
    parse_events();
    const auto started_at_kill = started;

    // The orphaned server must checkpoint and stop on its own.
    pid_t server_pid = 0;
    {
        std::ifstream in(dir + "/run/server.pid");
        in >> server_pid;
    }
    if (server_pid <= 0) return {false, "no server pid recorded"};
    const auto t1 = SteadyClock::now();
    while (launcher::ProcessRunner::alive(server_pid)) {
        if (elapsed_s(t1) > 60.0) {
            ::kill(server_pid, SIGKILL);
            return {false, "server did not stop after the idle timeout"};
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }

    const auto manifest = server::read_latest_manifest(dir + "/run");
    if (!manifest) return {false, "no final checkpoint manifest"};
    if (manifest->complete || manifest->stop_reason != "idle_timeout")
        return {false, "server did not stop via the idle timeout path"};

    // Every simulation running when the launcher died finished and was
    // fully ingested before the server stopped.
    for (int sim : started_at_kill) {
        const auto& done = manifest->completed_sims;
        if (std::find(done.begin(), done.end(), static_cast<std::uint32_t>(sim)) ==
            done.end()) {
            return {false, "simulation " + std::to_string(sim) +
                               " was running at launcher death but missing from the checkpoint"};
        }
    }
    char detail[192];
    std::snprintf(detail, sizeof detail,
                  "launcher killed with %zu sims started; orphans finished; server "
                  "checkpointed %zu sims and stopped idle",
                  started_at_kill.size(), manifest->completed_sims.size());
    const bool pass = manifest->completed_sims.size() < 12;
    if (pass) fs::remove_all(dir);
    return {pass, detail};
}

CriterionResult criterion_5() {
    const auto a = criterion_5a();
    const auto b = criterion_5b();
    const auto c = criterion_5c();
    return {a.pass && b.pass && c.pass,
            "(a) " + a.detail + " | (b) " + b.detail + " | (c) " + c.detail};
}

// ---------------------------------------------------------------------------
// Criterion 6: exactly-once and order independence, 100 randomized trials
// over 1000 messages.
// ---------------------------------------------------------------------------

CriterionResult criterion_6() {
    StudyConfig cfg;
    cfg.study_id = "accept6";
    cfg.mesh = {32, 1};
    cfg.timesteps = 50;
    cfg.n_simulations = 20;
    cfg.statistics.quantile_orders = {0.5, 0.9};
    cfg.statistics.thresholds = {0.5};
    cfg.statistics.declared_n = 20;
    cfg.server.ranks = 1;
    const proto::PartitionMap map(32, 1);

    CounterRng rng(2025, 0);
    std::uint64_t ctr = 0;
    std::vector<proto::Message> messages;
    for (std::uint32_t sim = 0; sim < 20; ++sim) {
        for (std::uint32_t t = 0; t < 50; ++t) {
            proto::Message m;
            m.kind = proto::MsgKind::data;
            m.study_id = cfg.study_id;
            m.simulation_id = sim;
            m.field_name = "dye";
            m.timestep = t;
            m.cell_offset = 0;
            m.values.resize(32);
            for (auto& v : m.values) v = rng.uniform(ctr++);
            messages.push_back(std::move(m));
        }
    }

    server::RankCore reference(cfg, map, 0);
    for (const auto& m : messages) reference.apply(m);
    if (!reference.complete()) return {false, "reference incomplete"};

    double worst_rel = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto delivery = messages;
        const std::size_t dupes = 50 + rng.below(ctr++, 200);
        for (std::size_t d = 0; d < dupes; ++d)
            delivery.push_back(messages[rng.below(ctr++, messages.size())]);
        for (std::size_t i = delivery.size() - 1; i > 0; --i)
            std::swap(delivery[i], delivery[rng.below(ctr++, i + 1)]);

        server::RankCore core(cfg, map, 0);
        for (const auto& m : delivery) core.apply(m);
        if (core.applied() != messages.size() || core.duplicates() != dupes)
            return {false, "exactly-once accounting failed"};
        if (core.ledger_population() != core.applied())
            return {false, "ledger population mismatch"};

        using field::Statistic;
        for (std::uint32_t t = 0; t < cfg.timesteps; ++t) {
            const auto& f = core.field("dye");
            const auto& ref = reference.field("dye");
            if (f.snapshot(Statistic::count(), t) != ref.snapshot(Statistic::count(), t))
                return {false, "counts differ under reordering"};
            if (f.snapshot(Statistic::min(), t) != ref.snapshot(Statistic::min(), t) ||
                f.snapshot(Statistic::max(), t) != ref.snapshot(Statistic::max(), t) ||
                f.snapshot(Statistic::exceedance(0.5), t) !=
                    ref.snapshot(Statistic::exceedance(0.5), t))
                return {false, "extrema/exceedance differ under reordering"};
            for (const auto stat : {Statistic::mean(), Statistic::variance()}) {
                const auto got = f.snapshot(stat, t);
                const auto want = ref.snapshot(stat, t);
                for (std::size_t i = 0; i < got.size(); ++i) {
                    const double rel = std::fabs(got[i] - want[i]) /
                                       std::max(std::fabs(want[i]), 1e-30);
                    worst_rel = std::max(worst_rel, rel);
                    if (rel > 1e-9)
                        return {false, "moment drift beyond 1e-9 under reordering"};
                }
            }
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof detail,
                  "100 trials x 1000 messages, worst moment deviation %.2e (bound 1e-9)",
                  worst_rel);
    return {true, detail};
}

// ---------------------------------------------------------------------------
// Criterion 7: protocol totality.
// ---------------------------------------------------------------------------

CriterionResult criterion_7() {
    CounterRng rng(1618, 0);
    std::uint64_t ctr = 0;

    const auto random_message = [&] {
        proto::Message m;
        m.kind = static_cast<proto::MsgKind>(1 + rng.below(ctr++, 6));
        const std::size_t len = rng.below(ctr++, 16);
        for (std::size_t i = 0; i < len; ++i)
            m.study_id.push_back(static_cast<char>('a' + rng.below(ctr++, 26)));
        m.simulation_id = static_cast<std::uint32_t>(rng.bits(ctr++));
        if (m.kind == proto::MsgKind::data) {
            m.field_name = "f" + std::to_string(rng.below(ctr++, 10));
            m.timestep = static_cast<std::uint32_t>(rng.below(ctr++, 1000));
            m.cell_offset = rng.below(ctr++, 1u << 20);
            m.values.resize(1 + rng.below(ctr++, 32));
            for (auto& v : m.values) v = rng.uniform(ctr++);
        }
        return m;
    };

    std::uint64_t decoded = 0, errored = 0;
    for (int i = 0; i < 100000; ++i) {
        std::vector<std::uint8_t> buf;
        const int mode = static_cast<int>(rng.below(ctr++, 3));
        if (mode == 0) {
            buf.resize(rng.below(ctr++, 96));
            for (auto& b : buf) b = static_cast<std::uint8_t>(rng.bits(ctr++));
        } else {
            buf = proto::encode_message(random_message());
            if (mode == 1) {
                buf.resize(rng.below(ctr++, buf.size() + 1));
            } else {
                const int flips = 1 + static_cast<int>(rng.below(ctr++, 6));
                for (int f = 0; f < flips && !buf.empty(); ++f) {
                    const std::size_t at = rng.below(ctr++, buf.size());
                    buf[at] ^= static_cast<std::uint8_t>(1 + rng.below(ctr++, 255));
                }
            }
        }
        const auto r = proto::decode_message(buf);
        if (std::holds_alternative<proto::Decoded>(r)) {
            ++decoded;
        } else {
            ++errored;
        }
    }

    for (int i = 0; i < 10000; ++i) {
        const auto m = random_message();
        const auto r = proto::decode_message(proto::encode_message(m));
        const auto* d = std::get_if<proto::Decoded>(&r);
        if (!d || !(d->message == m)) return {false, "round-trip mismatch"};
    }
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "1e5 fuzzed frames: %llu decoded, %llu typed errors, 0 crashes; 1e4 "
                  "round-trips exact",
                  static_cast<unsigned long long>(decoded),
                  static_cast<unsigned long long>(errored));
    return {true, detail};
}

// ---------------------------------------------------------------------------
// Criterion 8: elasticity.
// ---------------------------------------------------------------------------

bool timeline_respects_caps(const std::vector<launcher::TimelineEntry>& timeline,
                            std::string& err) {
    for (std::size_t i = 0; i < timeline.size(); ++i) {
        if (timeline[i].running > timeline[i].cap) {
            // Above the cap only while draining just after a cap reduction.
            if (i == 0 || timeline[i].running > timeline[i - 1].running) {
                err = "new starts above the concurrency cap";
                return false;
            }
        }
    }
    return true;
}

bool files_identical(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::vector<char> ba((std::istreambuf_iterator<char>(fa)),
                         std::istreambuf_iterator<char>());
    std::vector<char> bb((std::istreambuf_iterator<char>(fb)),
                         std::istreambuf_iterator<char>());
    return ba == bb;
}

CriterionResult criterion_8() {
    StudyConfig base;
    base.study_id = "accept8";
    base.mesh = {16, 8};
    base.timesteps = 30;
    base.n_simulations = 40;
    base.seed = 11;
    base.statistics.quantile_orders = {0.25, 0.5, 0.75};
    base.statistics.thresholds = {0.2};
    base.statistics.declared_n = 40;
    base.server.ranks = 2;
    base.server.checkpoint_period_ms = 5000;
    base.server.idle_timeout_ms = 20000;
    base.server.heartbeat_period_ms = 200;
    base.launcher.max_concurrent = 6;
    base.launcher.poll_period_ms = 10;
    base.launcher.retry_budget = 2;
    base.launcher.heartbeat_timeout_ms = 2000;
    base.launcher.sim_wall_limit_ms = 60000;
    // Fast transit so most (cell, timestep) positions carry real ensemble
    // variability for the oracle comparison.
    base.simulation.inflow_speed = 26.0;
    base.simulation.dt = 0.004;
    base.simulation.diffusivity = 0.002;
    base.simulation.delay_ms = 150;
    base.store_raw = true;

    const std::string dir_a = "/tmp/instat_accept8a";
    const std::string dir_b = "/tmp/instat_accept8b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    auto cfg_a = base;
    cfg_a.output_dir = dir_a;
    launcher::Launcher launch_a(cfg_a, dir_a);
    const auto report_a = launch_a.run();
    if (!report_a.success) return {false, "constant-cap study failed"};

    auto cfg_b = base;
    cfg_b.output_dir = dir_b;
    cfg_b.launcher.cap_schedule = {{15, 3}}; // halve the cap mid-study
    launcher::Launcher launch_b(cfg_b, dir_b);
    const auto report_b = launch_b.run();
    if (!report_b.success) return {false, "halved-cap study failed"};

    std::string err;
    if (!timeline_respects_caps(report_a.timeline, err) ||
        !timeline_respects_caps(report_b.timeline, err))
        return {false, err};
    bool saw_half = false;
    for (const auto& e : report_b.timeline) saw_half = saw_half || e.cap == 3;
    if (!saw_half || report_b.peak_running() > 6)
        return {false, "cap change did not take effect"};

    // Canonical replays of both runs' applied-message logs must export
    // bit-identical files: same message set, fixed order.
    const auto replay_a =
        server::replay_message_logs(cfg_a, dir_a + "/msglog", dir_a + "/replay");
    const auto replay_b =
        server::replay_message_logs(cfg_b, dir_b + "/msglog", dir_b + "/replay");
    if (!replay_a.complete || !replay_b.complete) return {false, "replay incomplete"};
    const auto summary = server::read_export_summary(dir_a + "/replay");
    for (const auto& stat : summary.stat_names) {
        const std::string file = summary.file_for("dye", stat);
        if (!files_identical(dir_a + "/replay/" + file, dir_b + "/replay/" + file))
            return {false, "replayed export differs for statistic " + stat};
    }

    // Live exports: order-insensitive statistics agree across the schedules.
    for (const auto& stat :
         {std::string("min"), std::string("max"), std::string("count"),
          std::string("exc0.2")}) {
        if (!files_identical(dir_a + "/export/" + summary.file_for("dye", stat),
                             dir_b + "/export/" + summary.file_for("dye", stat)))
            return {false, "live export differs exactly for " + stat};
    }
    auto mean_a = server::FieldExportFile::open(dir_a + "/export/dye.mean.fld");
    auto mean_b = server::FieldExportFile::open(dir_b + "/export/dye.mean.fld");
    for (std::uint32_t t = 0; t < base.timesteps; ++t) {
        const auto ra = mean_a.read_timestep(t);
        const auto rb = mean_b.read_timestep(t);
        for (std::size_t i = 0; i < ra.size(); ++i) {
            if (std::fabs(ra[i] - rb[i]) > 1e-9 * std::max(1.0, std::fabs(ra[i])))
                return {false, "live mean drifted beyond 1e-9 between schedules"};
        }
    }

    // Quantiles: both runs within the criterion-4 tolerance of their own
    // stored-sample oracle.
    const auto mad_a =
        check_quantiles_against_oracle(cfg_a, dir_a + "/msglog", dir_a + "/export");
    const auto mad_b =
        check_quantiles_against_oracle(cfg_b, dir_b + "/msglog", dir_b + "/export");
    if (!mad_a.pass) return {false, "constant-cap quantiles: " + mad_a.detail};
    if (!mad_b.pass) return {false, "halved-cap quantiles: " + mad_b.detail};

    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "caps respected (peaks %u vs %u), replayed exports bit-identical, live "
                  "commutative stats equal, quantiles within tolerance",
                  report_a.peak_running(), report_b.peak_running());
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    return {true, detail};
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0) only = std::atoi(argv[i + 1]);
    }

    struct Entry {
        int id;
        const char* name;
        CriterionResult (*fn)();
    };
    const Entry entries[] = {
        {1, "estimator calibration", &criterion_1},
        {2, "robustness ordering", &criterion_2},
        {3, "one-pass moment fidelity", &criterion_3},
        {4, "end-to-end ubiquitous quantiles", &criterion_4},
        {5, "fault tolerance", &criterion_5},
        {6, "exactly-once / order independence", &criterion_6},
        {7, "protocol totality", &criterion_7},
        {8, "elasticity", &criterion_8},
    };

    bool all_pass = true;
    for (const auto& e : entries) {
        if (only != 0 && e.id != only) continue;
        const auto t0 = SteadyClock::now();
        CriterionResult r;
        try {
            r = e.fn();
        } catch (const std::exception& ex) {
            r = {false, std::string("exception: ") + ex.what()};
        }
        std::printf("criterion %d (%s): %s [%.1f s]\n    %s\n", e.id, e.name,
                    r.pass ? "PASS" : "FAIL", elapsed_s(t0), r.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}
