#include "instat/launcher/launcher.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <poll.h>
#include <thread>

#include <json.hpp>

#include "instat/proto/codec.hpp"
#include "instat/server/checkpoint.hpp"

namespace instat::launcher {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// The CLI binary to spawn for server/simulation jobs. Tests point
// INSTAT_BIN at the installed binary; the CLI itself just re-executes.
std::string exe_path() {
    if (const char* bin = std::getenv("INSTAT_BIN")) return bin;
    return ProcessRunner::self_exe();
}

} // namespace

const char* to_string(StudyEvent::Type t) {
    switch (t) {
    case StudyEvent::Type::sim_start: return "sim_start";
    case StudyEvent::Type::sim_exit: return "sim_exit";
    case StudyEvent::Type::server_start: return "server_start";
    case StudyEvent::Type::server_ready: return "server_ready";
    case StudyEvent::Type::server_exit: return "server_exit";
    case StudyEvent::Type::cap_change: return "cap_change";
    case StudyEvent::Type::note: return "note";
    case StudyEvent::Type::study_complete: return "study_complete";
    case StudyEvent::Type::study_failed: return "study_failed";
    }
    return "?";
}

std::uint32_t StudyReport::peak_running() const {
    std::uint32_t peak = 0;
    for (const auto& e : timeline) peak = std::max(peak, e.running);
    return peak;
}

void StudyReport::save(const std::string& path) const {
    json j;
    j["success"] = success;
    j["wall_ms"] = wall_ms;
    j["total_retries"] = total_retries;
    j["server_restarts"] = server_restarts;
    j["n_simulations"] = n_simulations;
    j["export_dir"] = export_dir;
    j["failure_reason"] = failure_reason;
    json timeline_json = json::array();
    for (const auto& e : timeline)
        timeline_json.push_back({{"t_ms", e.t_ms}, {"running", e.running}, {"cap", e.cap}});
    j["timeline"] = timeline_json;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write study report " + path);
    out << j.dump(2) << "\n";
}

StudyReport StudyReport::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read study report " + path);
    json j;
    in >> j;
    StudyReport r;
    r.success = j.at("success").get<bool>();
    r.wall_ms = j.at("wall_ms").get<std::int64_t>();
    r.total_retries = j.at("total_retries").get<std::uint32_t>();
    r.server_restarts = j.at("server_restarts").get<std::uint32_t>();
    r.n_simulations = j.at("n_simulations").get<std::uint32_t>();
    r.export_dir = j.at("export_dir").get<std::string>();
    r.failure_reason = j.at("failure_reason").get<std::string>();
    for (const auto& e : j.at("timeline")) {
        r.timeline.push_back({e.at("t_ms").get<std::int64_t>(),
                              e.at("running").get<std::uint32_t>(),
                              e.at("cap").get<std::uint32_t>()});
    }
    return r;
}

Launcher::Launcher(StudyConfig cfg, std::string study_dir, LaunchHooks hooks)
    : cfg_(std::move(cfg)), study_dir_(std::move(study_dir)), hooks_(std::move(hooks)) {
    cfg_.validate();
}

void Launcher::emit(StudyEvent::Type type, std::uint32_t sim, int code,
                    const std::string& detail) {
    StudyEvent ev{type, sim, code, detail, ms_since(t0_, Clock::now())};
    if (events_out_ && events_out_->is_open()) {
        (*events_out_) << ev.t_ms << ' ' << to_string(type) << ' ' << sim << ' ' << code << ' '
                       << detail << '\n';
        events_out_->flush();
    }
    if (hooks_.on_event) hooks_.on_event(*this, ev);
}

std::vector<proto::Endpoint> Launcher::read_endpoints() const {
    std::ifstream in(study_dir_ + "/endpoints.txt");
    std::vector<proto::Endpoint> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(proto::Endpoint::parse(line));
    }
    return out;
}

void Launcher::start_server(std::uint32_t attempt) {
    if (attempt > 0) {
        // Make sure the previous incarnation is gone, collect the orphan
        // kills we just issued, then reconcile against the checkpoint.
        if (server_pid_ > 0) {
            procs_.kill(server_pid_, SIGKILL);
            procs_.wait_for(server_pid_, 3000);
            server_pid_ = -1;
        }
        const auto deadline = Clock::now() + Ms(3000);
        while (!sim_pids_.empty() && Clock::now() < deadline) {
            deliver_exits();
            std::this_thread::sleep_for(Ms(5));
        }
        const auto manifest = server::read_latest_manifest(study_dir_);
        std::vector<std::uint32_t> completed;
        if (manifest) completed = manifest->completed_sims;
        execute(controller_->on_server_restored(completed, Clock::now()));

        std::error_code ec;
        fs::remove(study_dir_ + "/endpoints.txt", ec);
        const bool restore = manifest.has_value();
        emit(StudyEvent::Type::server_start, 0, static_cast<int>(attempt),
             restore ? "restore" : "fresh");
        std::vector<std::string> argv = {exe_path(), "serve", "--config",
                                         study_dir_ + "/config.json", "--study-dir",
                                         study_dir_};
        if (restore) argv.push_back("--restore");
        server_pid_ = procs_.spawn(
            argv, {"INSTAT_LAUNCHER_EP=127.0.0.1:" + std::to_string(hb_listener_.port())});
    } else {
        std::error_code ec;
        fs::remove(study_dir_ + "/endpoints.txt", ec);
        emit(StudyEvent::Type::server_start, 0, 0, "fresh");
        server_pid_ = procs_.spawn(
            {exe_path(), "serve", "--config", study_dir_ + "/config.json",
             "--study-dir", study_dir_},
            {"INSTAT_LAUNCHER_EP=127.0.0.1:" + std::to_string(hb_listener_.port())});
    }
    endpoints_pending_ = true;
}

void Launcher::start_sim(std::uint32_t sim, std::uint32_t attempt) {
    std::vector<std::string> env = {"INSTAT_ATTEMPT=" + std::to_string(attempt)};
    std::string eps;
    for (const auto& ep : endpoints_) {
        if (!eps.empty()) eps += ",";
        eps += ep.to_string();
    }
    env.push_back("INSTAT_ENDPOINTS=" + eps);
    for (const auto& f : cfg_.fault_sims) {
        if (f.sim_id == sim) {
            env.push_back("INSTAT_CRASH_AT_STEP=" + std::to_string(f.crash_at_step));
            env.push_back("INSTAT_CRASH_ATTEMPTS=" + std::to_string(f.attempts));
        }
    }
    const pid_t pid = procs_.spawn({exe_path(), "simulate", "--config",
                                    study_dir_ + "/config.json", "--sim-id",
                                    std::to_string(sim), "--params", params_[sim].to_arg()},
                                   env);
    sim_pids_[pid] = sim;
    pid_of_sim_[sim] = pid;
    emit(StudyEvent::Type::sim_start, sim, static_cast<int>(attempt), "");
}

void Launcher::execute(const std::vector<Action>& actions) {
    for (const auto& a : actions) {
        switch (a.kind) {
        case Action::Kind::start_server:
            start_server(a.attempt);
            break;
        case Action::Kind::kill_server:
            if (server_pid_ > 0) {
                procs_.kill(server_pid_, SIGKILL);
                procs_.wait_for(server_pid_, 3000);
                server_pid_ = -1;
            }
            break;
        case Action::Kind::start_sim:
            start_sim(a.sim_id, a.attempt);
            break;
        case Action::Kind::kill_sim: {
            const auto it = pid_of_sim_.find(a.sim_id);
            if (it != pid_of_sim_.end()) procs_.kill(it->second, SIGKILL);
            break;
        }
        case Action::Kind::study_complete:
            emit(StudyEvent::Type::study_complete, 0, 0, "");
            break;
        case Action::Kind::study_failed:
            failure_detail_ = a.message;
            emit(StudyEvent::Type::study_failed, a.sim_id, 0, a.message);
            break;
        case Action::Kind::note:
            emit(StudyEvent::Type::note, a.sim_id, static_cast<int>(a.attempt), a.message);
            break;
        }
    }
}

void Launcher::drain_heartbeats() {
    while (auto stream = hb_listener_.accept(0)) {
        hb_conns_.push_back(HbConn{std::move(*stream), {}, 0, true});
    }
    for (auto& conn : hb_conns_) {
        if (!conn.open) continue;
        pollfd p{conn.stream.fd(), POLLIN, 0};
        while (::poll(&p, 1, 0) > 0 && (p.revents & (POLLIN | POLLHUP))) {
            try {
                if (!conn.stream.recv_available(conn.buf)) {
                    conn.open = false;
                    break;
                }
            } catch (const IoError&) {
                conn.open = false;
                break;
            }
            if (p.revents & POLLHUP) break;
        }
        while (conn.buf.size() - conn.pos >= proto::kFrameHeaderSize) {
            auto decoded = proto::decode_message(
                std::span(conn.buf).subspan(conn.pos));
            if (const auto* err = std::get_if<proto::DecodeError>(&decoded)) {
                if (*err == proto::DecodeError::truncated) break;
                conn.open = false;
                break;
            }
            const auto& d = std::get<proto::Decoded>(decoded);
            if (d.message.kind == proto::MsgKind::heartbeat)
                execute(controller_->on_server_heartbeat(Clock::now()));
            conn.pos += d.frame_size;
        }
        if (conn.pos > 4096) {
            conn.buf.erase(conn.buf.begin(), conn.buf.begin() + static_cast<long>(conn.pos));
            conn.pos = 0;
        }
    }
    std::erase_if(hb_conns_, [](const HbConn& c) { return !c.open; });
}

void Launcher::check_server_ready() {
    if (!endpoints_pending_) return;
    const auto eps = read_endpoints();
    if (eps.size() == cfg_.server.ranks) {
        endpoints_ = eps;
        endpoints_pending_ = false;
        emit(StudyEvent::Type::server_ready, 0, 0, "");
        execute(controller_->on_server_ready(Clock::now()));
    }
}

void Launcher::deliver_exits() {
    for (const auto& ev : procs_.reap()) {
        if (ev.pid == server_pid_) {
            server_pid_ = -1;
            emit(StudyEvent::Type::server_exit, 0, ev.exit_code, "");
            execute(controller_->on_server_exit(ev.exit_code, Clock::now()));
            continue;
        }
        const auto it = sim_pids_.find(ev.pid);
        if (it == sim_pids_.end()) continue;
        const std::uint32_t sim = it->second;
        sim_pids_.erase(it);
        pid_of_sim_.erase(sim);
        emit(StudyEvent::Type::sim_exit, sim, ev.exit_code, "");
        execute(controller_->on_sim_exit(sim, ev.exit_code, Clock::now()));
    }
}

void Launcher::kill_server_now() {
    if (server_pid_ > 0) procs_.kill(server_pid_, SIGKILL);
}

void Launcher::set_cap(std::uint32_t cap) {
    emit(StudyEvent::Type::cap_change, 0, static_cast<int>(cap), "");
    execute(controller_->set_cap(cap, Clock::now()));
}

StudyReport Launcher::run() {
    proto::ignore_sigpipe();
    fs::create_directories(study_dir_);
    cfg_.save(study_dir_ + "/config.json");
    params_ = generate_parameter_sets(cfg_.n_simulations, cfg_.seed);

    std::ofstream events(study_dir_ + "/events.log", std::ios::app);
    events_out_ = &events;
    hb_listener_ = proto::TcpListener::bind("127.0.0.1", 0);

    t0_ = Clock::now();
    controller_.emplace(cfg_, t0_);

    while (!controller_->finished()) {
        execute(controller_->on_tick(Clock::now()));
        drain_heartbeats();
        check_server_ready();
        deliver_exits();
        std::this_thread::sleep_for(Ms(cfg_.launcher.poll_period_ms));
    }

    // Tear down whatever is still alive on failure; on success everything
    // has already exited.
    for (const auto& [pid, sim] : sim_pids_) procs_.kill(pid, SIGKILL);
    if (server_pid_ > 0 && !controller_->succeeded()) {
        procs_.kill(server_pid_, SIGKILL);
        procs_.wait_for(server_pid_, 2000);
    }

    StudyReport report;
    report.success = controller_->succeeded();
    report.wall_ms = ms_since(t0_, Clock::now());
    report.total_retries = controller_->total_retries();
    report.server_restarts = controller_->server_restarts();
    report.n_simulations = cfg_.n_simulations;
    report.timeline = controller_->timeline();
    report.export_dir = study_dir_ + "/export";
    report.failure_reason = failure_detail_;
    report.save(study_dir_ + "/report.json");
    events_out_ = nullptr;
    return report;
}

} // namespace instat::launcher
