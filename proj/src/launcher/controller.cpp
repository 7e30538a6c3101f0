#include "instat/launcher/controller.hpp"

namespace instat::launcher {

StudyController::StudyController(const StudyConfig& cfg, TimePoint now)
    : cfg_(cfg), t0_(now), sims_(cfg.n_simulations), cap_(cfg.launcher.max_concurrent) {
    record_timeline(now);
}

void StudyController::record_timeline(TimePoint now) {
    const TimelineEntry entry{ms_since(t0_, now), running_, cap_};
    if (!timeline_.empty() && timeline_.back().running == entry.running &&
        timeline_.back().cap == entry.cap)
        return;
    timeline_.push_back(entry);
}

void StudyController::check_complete(std::vector<Action>& out) {
    if (!failed_ && !complete_ && done_ == sims_.size() && server_exited_clean_) {
        complete_ = true;
        out.push_back({Action::Kind::study_complete, 0, 0, ""});
    }
}

void StudyController::schedule(std::vector<Action>& out, TimePoint now) {
    if (phase_ != ServerPhase::up || finished()) return;
    for (std::uint32_t sim = 0; sim < sims_.size() && running_ < cap_; ++sim) {
        Sim& s = sims_[sim];
        if (s.state != SimState::pending) continue;
        s.state = SimState::running;
        s.started = now;
        s.killed_for_restart = false;
        ++running_;
        out.push_back({Action::Kind::start_sim, sim, s.attempts, ""});
    }
    record_timeline(now);
}

void StudyController::apply_cap_schedule(std::vector<Action>& out, TimePoint now) {
    while (next_cap_change_ < cfg_.launcher.cap_schedule.size() &&
           done_ >= cfg_.launcher.cap_schedule[next_cap_change_].after_done) {
        cap_ = cfg_.launcher.cap_schedule[next_cap_change_].cap;
        ++next_cap_change_;
        out.push_back({Action::Kind::note, 0, 0,
                       "concurrency cap changed to " + std::to_string(cap_)});
        record_timeline(now);
    }
}

void StudyController::fail_server(std::vector<Action>& out, TimePoint now,
                                  const std::string& why) {
    if (phase_ == ServerPhase::restarting || finished()) return;
    ++server_restarts_;
    if (server_restarts_ > cfg_.server.max_restarts) {
        failed_ = true;
        out.push_back({Action::Kind::study_failed, 0, 0,
                       "server unrecoverable after " + std::to_string(server_restarts_ - 1) +
                           " restarts (" + why + ")"});
        return;
    }
    phase_ = ServerPhase::restarting;
    server_started_ = now;
    out.push_back({Action::Kind::note, 0, 0, "server failed: " + why});
    out.push_back({Action::Kind::kill_server, 0, 0, ""});
    for (std::uint32_t sim = 0; sim < sims_.size(); ++sim) {
        if (sims_[sim].state == SimState::running) {
            sims_[sim].killed_for_restart = true;
            out.push_back({Action::Kind::kill_sim, sim, 0, ""});
        }
    }
    out.push_back({Action::Kind::start_server, 0, server_restarts_, ""});
}

std::vector<Action> StudyController::on_tick(TimePoint now) {
    std::vector<Action> out;
    if (finished()) return out;

    if (!server_spawned_) {
        server_spawned_ = true;
        phase_ = ServerPhase::starting;
        server_started_ = now;
        out.push_back({Action::Kind::start_server, 0, 0, ""});
        return out;
    }

    const auto timeout = Ms(cfg_.launcher.heartbeat_timeout_ms);
    if (phase_ == ServerPhase::up || phase_ == ServerPhase::suspect) {
        const auto silence = now - last_heartbeat_;
        if (silence > 2 * timeout) {
            fail_server(out, now, "heartbeat silent for " +
                                      std::to_string(ms_since(last_heartbeat_, now)) + " ms");
        } else if (silence > timeout && phase_ == ServerPhase::up) {
            phase_ = ServerPhase::suspect;
            out.push_back({Action::Kind::note, 0, 0, "server suspect: heartbeat overdue"});
        }
    } else if (phase_ == ServerPhase::starting &&
               now - server_started_ > Ms(cfg_.launcher.server_start_grace_ms)) {
        fail_server(out, now, "server did not become ready in time");
    }

    // Stragglers past the wall limit are killed and resubmitted.
    for (std::uint32_t sim = 0; sim < sims_.size(); ++sim) {
        Sim& s = sims_[sim];
        if (s.state == SimState::running && !s.kill_requested && !s.killed_for_restart &&
            now - s.started > Ms(cfg_.launcher.sim_wall_limit_ms)) {
            s.kill_requested = true;
            out.push_back({Action::Kind::kill_sim, sim, 0, ""});
            out.push_back({Action::Kind::note, sim, 0,
                           "simulation " + std::to_string(sim) + " exceeded the wall limit"});
        }
    }

    apply_cap_schedule(out, now);
    schedule(out, now);
    return out;
}

std::vector<Action> StudyController::on_sim_exit(std::uint32_t sim, int exit_code,
                                                 TimePoint now) {
    std::vector<Action> out;
    Sim& s = sims_[sim];
    if (s.state != SimState::running) return out;
    --running_;
    const bool killed_for_restart = s.killed_for_restart;
    s.killed_for_restart = false;
    s.kill_requested = false;

    if (killed_for_restart) {
        s.state = SimState::pending; // no budget charge; the server failed, not the sim
    } else if (exit_code == 0) {
        s.state = SimState::done;
        ++done_;
        apply_cap_schedule(out, now);
    } else if (phase_ != ServerPhase::up) {
        s.state = SimState::pending;
        out.push_back({Action::Kind::note, sim, 0,
                       "simulation " + std::to_string(sim) +
                           " failed while the server was down; requeued"});
    } else {
        ++s.attempts;
        ++total_retries_;
        if (s.attempts > cfg_.launcher.retry_budget) {
            s.state = SimState::failed;
            failed_ = true;
            out.push_back({Action::Kind::study_failed, sim, s.attempts,
                           "simulation " + std::to_string(sim) + " failed " +
                               std::to_string(s.attempts) + " times (exit code " +
                               std::to_string(exit_code) + ")"});
            return out;
        }
        s.state = SimState::pending;
        out.push_back({Action::Kind::note, sim, s.attempts,
                       "simulation " + std::to_string(sim) + " exited with code " +
                           std::to_string(exit_code) + "; retry " +
                           std::to_string(s.attempts)});
    }
    record_timeline(now);
    check_complete(out);
    schedule(out, now);
    return out;
}

std::vector<Action> StudyController::on_server_heartbeat(TimePoint now) {
    std::vector<Action> out;
    last_heartbeat_ = now;
    if (phase_ == ServerPhase::suspect) {
        phase_ = ServerPhase::up;
        out.push_back({Action::Kind::note, 0, 0, "server heartbeat recovered"});
        schedule(out, now);
    }
    return out;
}

std::vector<Action> StudyController::on_server_ready(TimePoint now) {
    std::vector<Action> out;
    if (finished()) return out;
    phase_ = ServerPhase::up;
    last_heartbeat_ = now;
    out.push_back({Action::Kind::note, 0, 0, "server ready"});
    schedule(out, now);
    return out;
}

std::vector<Action> StudyController::on_server_exit(int exit_code, TimePoint now) {
    std::vector<Action> out;
    if (finished()) return out;
    if (exit_code == 0) {
        server_exited_clean_ = true;
        phase_ = ServerPhase::stopped;
        out.push_back({Action::Kind::note, 0, 0, "server completed"});
        check_complete(out);
    } else {
        fail_server(out, now, "server exited with code " + std::to_string(exit_code));
    }
    return out;
}

std::vector<Action> StudyController::on_server_restored(
    const std::vector<std::uint32_t>& completed, TimePoint now) {
    std::vector<Action> out;
    std::vector<bool> is_complete(sims_.size(), false);
    for (std::uint32_t sim : completed) {
        if (sim < sims_.size()) is_complete[sim] = true;
    }
    for (std::uint32_t sim = 0; sim < sims_.size(); ++sim) {
        Sim& s = sims_[sim];
        if (is_complete[sim]) {
            if (s.state == SimState::pending || s.state == SimState::failed) {
                s.state = SimState::done;
                ++done_;
            }
        } else if (s.state == SimState::done) {
            // Its data postdated the checkpoint; run it again.
            s.state = SimState::pending;
            --done_;
            out.push_back({Action::Kind::note, sim, 0,
                           "simulation " + std::to_string(sim) +
                               " lost to the restore point; resubmitting"});
        }
    }
    record_timeline(now);
    return out;
}

std::vector<Action> StudyController::set_cap(std::uint32_t cap, TimePoint now) {
    std::vector<Action> out;
    cap_ = cap;
    out.push_back({Action::Kind::note, 0, 0, "concurrency cap set to " + std::to_string(cap)});
    record_timeline(now);
    schedule(out, now);
    return out;
}

} // namespace instat::launcher
