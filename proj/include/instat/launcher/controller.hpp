#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "instat/config.hpp"
#include "instat/timing.hpp"

namespace instat::launcher {

enum class SimState : std::uint8_t { pending, running, done, failed };
enum class ServerPhase : std::uint8_t {
    starting,   // spawned, waiting for endpoints
    up,         // serving, heartbeats fresh
    suspect,    // heartbeat silence past the timeout
    restarting, // declared failed, orphans being cleaned up
    stopped,    // exited after study completion
};

struct Action {
    enum class Kind {
        start_server,   // spawn the server process (restore = attempt > 0)
        kill_server,    // make sure the server process is dead
        start_sim,      // spawn simulation sim_id with the given attempt
        kill_sim,       // SIGKILL the running simulation sim_id
        study_complete, // all sims done and the server exited cleanly
        study_failed,   // unrecoverable; message carries the diagnostic
        note,           // informational event for the log/report
    };

    Kind kind;
    std::uint32_t sim_id = 0;
    std::uint32_t attempt = 0;
    std::string message;
};

struct TimelineEntry {
    std::int64_t t_ms = 0;
    std::uint32_t running = 0;
    std::uint32_t cap = 0;
};

// Pure scheduling/fault-handling state machine for one study. The launcher
// feeds it events with explicit timestamps and executes the returned
// actions; tests drive it with a synthetic clock. It never touches the OS.
class StudyController {
public:
    StudyController(const StudyConfig& cfg, TimePoint now);

    // Event inputs. Every call may emit actions.
    std::vector<Action> on_tick(TimePoint now);
    std::vector<Action> on_sim_exit(std::uint32_t sim, int exit_code, TimePoint now);
    std::vector<Action> on_server_heartbeat(TimePoint now);
    std::vector<Action> on_server_ready(TimePoint now); // endpoints published
    std::vector<Action> on_server_exit(int exit_code, TimePoint now);
    // Completed-simulation set from the checkpoint manifest read back before
    // a server restart; reconciles optimistic Done states.
    std::vector<Action> on_server_restored(const std::vector<std::uint32_t>& completed,
                                           TimePoint now);
    std::vector<Action> set_cap(std::uint32_t cap, TimePoint now);

    bool finished() const { return complete_ || failed_; }
    bool succeeded() const { return complete_; }
    bool study_failed() const { return failed_; }
    std::uint32_t done_count() const { return done_; }
    std::uint32_t running_count() const { return running_; }
    std::uint32_t cap() const { return cap_; }
    SimState sim_state(std::uint32_t sim) const { return sims_[sim].state; }
    std::uint32_t sim_attempts(std::uint32_t sim) const { return sims_[sim].attempts; }
    ServerPhase server_phase() const { return phase_; }
    std::uint32_t server_restarts() const { return server_restarts_; }
    std::uint32_t total_retries() const { return total_retries_; }
    const std::vector<TimelineEntry>& timeline() const { return timeline_; }

private:
    struct Sim {
        SimState state = SimState::pending;
        std::uint32_t attempts = 0;
        TimePoint started{};
        bool killed_for_restart = false;
        bool kill_requested = false;
    };

    void schedule(std::vector<Action>& out, TimePoint now);
    void fail_server(std::vector<Action>& out, TimePoint now, const std::string& why);
    void apply_cap_schedule(std::vector<Action>& out, TimePoint now);
    void record_timeline(TimePoint now);
    void check_complete(std::vector<Action>& out);

    StudyConfig cfg_;
    TimePoint t0_;
    std::vector<Sim> sims_;
    std::uint32_t cap_;
    std::uint32_t running_ = 0;
    std::uint32_t done_ = 0;
    std::uint32_t total_retries_ = 0;
    std::size_t next_cap_change_ = 0;

    ServerPhase phase_ = ServerPhase::starting;
    bool server_spawned_ = false;
    bool server_exited_clean_ = false;
    std::uint32_t server_restarts_ = 0;
    TimePoint last_heartbeat_{};
    TimePoint server_started_{};

    bool complete_ = false;
    bool failed_ = false;
    std::vector<TimelineEntry> timeline_;
};

} // namespace instat::launcher
