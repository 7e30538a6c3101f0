#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "instat/config.hpp"
#include "instat/launcher/controller.hpp"
#include "instat/launcher/params.hpp"
#include "instat/launcher/process.hpp"
#include "instat/proto/socket.hpp"

namespace instat::launcher {

struct StudyEvent {
    enum class Type {
        sim_start,
        sim_exit,
        server_start,
        server_ready,
        server_exit,
        cap_change,
        note,
        study_complete,
        study_failed,
    };

    Type type;
    std::uint32_t sim_id = 0;
    int code = 0;
    std::string detail;
    std::int64_t t_ms = 0;
};

const char* to_string(StudyEvent::Type t);

struct StudyReport {
    bool success = false;
    std::int64_t wall_ms = 0;
    std::uint32_t total_retries = 0;
    std::uint32_t server_restarts = 0;
    std::uint32_t n_simulations = 0;
    std::vector<TimelineEntry> timeline;
    std::string export_dir;
    std::string failure_reason; // first study_failed detail, empty on success

    std::uint32_t peak_running() const;
    void save(const std::string& path) const;
    static StudyReport load(const std::string& path);
};

class Launcher;

struct LaunchHooks {
    // Observes every event as it happens; may call the injection methods on
    // the launcher (same thread, re-entrant into the run loop).
    std::function<void(Launcher&, const StudyEvent&)> on_event;
};

// Drives one study end to end: spawns the server and the simulation
// processes with bounded concurrency, monitors heartbeats and exit codes,
// retries failures, restarts the server from its checkpoint, and records the
// elasticity timeline.
class Launcher {
public:
    Launcher(StudyConfig cfg, std::string study_dir, LaunchHooks hooks = {});

    StudyReport run();

    // Test/operator injection points, valid while run() is on the stack.
    void kill_server_now();
    void set_cap(std::uint32_t cap);

    pid_t server_pid() const { return server_pid_; }
    const StudyConfig& config() const { return cfg_; }
    const std::string& study_dir() const { return study_dir_; }

private:
    void execute(const std::vector<Action>& actions);
    void start_server(std::uint32_t attempt);
    void start_sim(std::uint32_t sim, std::uint32_t attempt);
    void drain_heartbeats();
    void check_server_ready();
    void deliver_exits();
    void emit(StudyEvent::Type type, std::uint32_t sim, int code, const std::string& detail);
    std::vector<proto::Endpoint> read_endpoints() const;

    StudyConfig cfg_;
    std::string study_dir_;
    LaunchHooks hooks_;
    std::optional<StudyController> controller_;
    ProcessRunner procs_;
    std::vector<ParameterSet> params_;

    proto::TcpListener hb_listener_;
    struct HbConn {
        proto::TcpStream stream;
        std::vector<std::uint8_t> buf;
        std::size_t pos = 0;
        bool open = true;
    };
    std::vector<HbConn> hb_conns_;

    pid_t server_pid_ = -1;
    std::map<pid_t, std::uint32_t> sim_pids_;
    std::map<std::uint32_t, pid_t> pid_of_sim_;
    bool endpoints_pending_ = false;
    std::vector<proto::Endpoint> endpoints_;

    TimePoint t0_{};
    std::string failure_detail_;
    std::ofstream* events_out_ = nullptr; // owned by run()
};

} // namespace instat::launcher
