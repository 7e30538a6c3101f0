#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "instat/stats/stats_config.hpp"

namespace instat {

struct MeshConfig {
    std::uint32_t nx = 64;
    std::uint32_t ny = 32;

    std::uint64_t n_cells() const {
        return static_cast<std::uint64_t>(nx) * static_cast<std::uint64_t>(ny);
    }
    bool operator==(const MeshConfig&) const = default;
};

struct ServerConfig {
    std::uint32_t ranks = 2;
    std::uint16_t base_port = 0; // 0 = ephemeral ports, published via endpoints file
    std::uint32_t checkpoint_period_ms = 5000;
    std::uint32_t idle_timeout_ms = 20000;
    std::uint32_t heartbeat_period_ms = 1000;
    std::uint32_t max_restarts = 3;

    bool operator==(const ServerConfig&) const = default;
};

struct CapChange {
    std::uint32_t after_done = 0; // applies once this many simulations are done
    std::uint32_t cap = 1;

    bool operator==(const CapChange&) const = default;
};

struct LauncherConfig {
    std::uint32_t max_concurrent = 4;
    std::uint32_t retry_budget = 2;
    std::uint32_t heartbeat_timeout_ms = 5000;
    std::uint32_t poll_period_ms = 50;
    std::uint32_t sim_wall_limit_ms = 120000;
    std::uint32_t server_start_grace_ms = 15000;
    std::vector<CapChange> cap_schedule;

    bool operator==(const LauncherConfig&) const = default;
};

struct Obstacle {
    double x = 0.0;
    double y = 0.0;
    double r = 0.0;

    bool operator==(const Obstacle&) const = default;
};

struct SimConfig {
    double domain_x = 2.0;
    double domain_y = 1.0;
    double dt = 0.001;
    double diffusivity = 0.02;
    double inflow_speed = 16.0;
    std::vector<Obstacle> obstacles;
    std::uint32_t delay_ms = 0; // artificial per-run slowdown, for scheduling tests

    bool operator==(const SimConfig&) const = default;
};

// Testing hook: the listed simulations abort just before sending the given
// timestep while their attempt number is below `attempts`.
struct FaultSpec {
    std::uint32_t sim_id = 0;
    std::uint32_t crash_at_step = 0;
    std::uint32_t attempts = 1;

    bool operator==(const FaultSpec&) const = default;
};

struct StudyConfig {
    std::string study_id = "study";
    MeshConfig mesh;
    std::uint32_t timesteps = 100;
    std::vector<std::string> fields = {"dye"};
    std::uint32_t n_simulations = 100;
    std::uint64_t seed = 42;
    stats::StatisticsConfig statistics;
    ServerConfig server;
    LauncherConfig launcher;
    SimConfig simulation;
    std::string output_dir = "out";
    bool store_raw = false;
    std::vector<FaultSpec> fault_sims;

    static StudyConfig load(const std::string& path);
    static StudyConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
    void save(const std::string& path) const;

    void validate() const;

    // Hash over every field that shapes server state layout or statistics;
    // checkpoints refuse to restore under a different hash.
    std::uint64_t state_hash() const;

    bool operator==(const StudyConfig&) const = default;
};

} // namespace instat
