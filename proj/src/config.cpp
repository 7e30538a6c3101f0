#include "instat/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "instat/error.hpp"

namespace instat {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<double> all_percentiles() {
    std::vector<double> out;
    out.reserve(99);
    for (int p = 1; p <= 99; ++p) out.push_back(p / 100.0);
    return out;
}

stats::StatisticsConfig stats_from_json(const json& j, std::uint32_t n_simulations) {
    stats::StatisticsConfig cfg;
    cfg.declared_n = 0;
    if (j.contains("percentiles") && j.at("percentiles").get<bool>())
        cfg.quantile_orders = all_percentiles();
    read_if(j, "quantile_orders", cfg.quantile_orders);
    read_if(j, "thresholds", cfg.thresholds);
    read_if(j, "gain_c", cfg.gain_c);
    if (j.contains("schedule")) {
        const std::string s = j.at("schedule").get<std::string>();
        if (s == "linear") {
            cfg.schedule = stats::GammaSchedule::linear();
        } else if (s.rfind("constant:", 0) == 0) {
            cfg.schedule = stats::GammaSchedule::constant(std::stod(s.substr(9)));
        } else {
            throw ConfigError("schedule must be 'linear' or 'constant:<gamma>', got " + s);
        }
    }
    std::uint64_t declared = 0;
    read_if(j, "declared_n", declared);
    cfg.declared_n = declared != 0 ? declared : n_simulations;
    return cfg;
}

json stats_to_json(const stats::StatisticsConfig& cfg) {
    json j;
    j["quantile_orders"] = cfg.quantile_orders;
    j["thresholds"] = cfg.thresholds;
    j["gain_c"] = cfg.gain_c;
    j["schedule"] = cfg.schedule.kind == stats::GammaSchedule::Kind::linear
                        ? "linear"
                        : "constant:" + std::to_string(cfg.schedule.constant_gamma);
    j["declared_n"] = cfg.declared_n;
    return j;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace

StudyConfig StudyConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    StudyConfig cfg;
    try {
        read_if(j, "study_id", cfg.study_id);
        if (j.contains("mesh")) {
            read_if(j.at("mesh"), "nx", cfg.mesh.nx);
            read_if(j.at("mesh"), "ny", cfg.mesh.ny);
        }
        read_if(j, "timesteps", cfg.timesteps);
        read_if(j, "fields", cfg.fields);
        read_if(j, "n_simulations", cfg.n_simulations);
        read_if(j, "seed", cfg.seed);
        cfg.statistics = j.contains("statistics")
                             ? stats_from_json(j.at("statistics"), cfg.n_simulations)
                             : stats_from_json(json::object(), cfg.n_simulations);
        if (j.contains("server")) {
            const auto& s = j.at("server");
            read_if(s, "ranks", cfg.server.ranks);
            read_if(s, "base_port", cfg.server.base_port);
            read_if(s, "checkpoint_period_ms", cfg.server.checkpoint_period_ms);
            read_if(s, "idle_timeout_ms", cfg.server.idle_timeout_ms);
            read_if(s, "heartbeat_period_ms", cfg.server.heartbeat_period_ms);
            read_if(s, "max_restarts", cfg.server.max_restarts);
        }
        if (j.contains("launcher")) {
            const auto& l = j.at("launcher");
            read_if(l, "max_concurrent", cfg.launcher.max_concurrent);
            read_if(l, "retry_budget", cfg.launcher.retry_budget);
            read_if(l, "heartbeat_timeout_ms", cfg.launcher.heartbeat_timeout_ms);
            read_if(l, "poll_period_ms", cfg.launcher.poll_period_ms);
            read_if(l, "sim_wall_limit_ms", cfg.launcher.sim_wall_limit_ms);
            read_if(l, "server_start_grace_ms", cfg.launcher.server_start_grace_ms);
            if (l.contains("cap_schedule")) {
                for (const auto& entry : l.at("cap_schedule")) {
                    CapChange c;
                    c.after_done = entry.at("after_done").get<std::uint32_t>();
                    c.cap = entry.at("cap").get<std::uint32_t>();
                    cfg.launcher.cap_schedule.push_back(c);
                }
            }
        }
        if (j.contains("simulation")) {
            const auto& s = j.at("simulation");
            read_if(s, "domain_x", cfg.simulation.domain_x);
            read_if(s, "domain_y", cfg.simulation.domain_y);
            read_if(s, "dt", cfg.simulation.dt);
            read_if(s, "diffusivity", cfg.simulation.diffusivity);
            read_if(s, "inflow_speed", cfg.simulation.inflow_speed);
            read_if(s, "delay_ms", cfg.simulation.delay_ms);
            if (s.contains("obstacles")) {
                for (const auto& o : s.at("obstacles")) {
                    cfg.simulation.obstacles.push_back(
                        {o.at("x").get<double>(), o.at("y").get<double>(),
                         o.at("r").get<double>()});
                }
            }
        }
        read_if(j, "output_dir", cfg.output_dir);
        read_if(j, "store_raw", cfg.store_raw);
        if (j.contains("fault_sims")) {
            for (const auto& f : j.at("fault_sims")) {
                FaultSpec spec;
                spec.sim_id = f.at("sim_id").get<std::uint32_t>();
                spec.crash_at_step = f.at("crash_at_step").get<std::uint32_t>();
                read_if(f, "attempts", spec.attempts);
                cfg.fault_sims.push_back(spec);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

StudyConfig StudyConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string StudyConfig::to_json_text() const {
    json j;
    j["study_id"] = study_id;
    j["mesh"] = {{"nx", mesh.nx}, {"ny", mesh.ny}};
    j["timesteps"] = timesteps;
    j["fields"] = fields;
    j["n_simulations"] = n_simulations;
    j["seed"] = seed;
    j["statistics"] = stats_to_json(statistics);
    j["server"] = {{"ranks", server.ranks},
                   {"base_port", server.base_port},
                   {"checkpoint_period_ms", server.checkpoint_period_ms},
                   {"idle_timeout_ms", server.idle_timeout_ms},
                   {"heartbeat_period_ms", server.heartbeat_period_ms},
                   {"max_restarts", server.max_restarts}};
    json caps = json::array();
    for (const auto& c : launcher.cap_schedule)
        caps.push_back({{"after_done", c.after_done}, {"cap", c.cap}});
    j["launcher"] = {{"max_concurrent", launcher.max_concurrent},
                     {"retry_budget", launcher.retry_budget},
                     {"heartbeat_timeout_ms", launcher.heartbeat_timeout_ms},
                     {"poll_period_ms", launcher.poll_period_ms},
                     {"sim_wall_limit_ms", launcher.sim_wall_limit_ms},
                     {"server_start_grace_ms", launcher.server_start_grace_ms},
                     {"cap_schedule", caps}};
    json obstacles = json::array();
    for (const auto& o : simulation.obstacles)
        obstacles.push_back({{"x", o.x}, {"y", o.y}, {"r", o.r}});
    j["simulation"] = {{"domain_x", simulation.domain_x},
                       {"domain_y", simulation.domain_y},
                       {"dt", simulation.dt},
                       {"diffusivity", simulation.diffusivity},
                       {"inflow_speed", simulation.inflow_speed},
                       {"obstacles", obstacles},
                       {"delay_ms", simulation.delay_ms}};
    j["output_dir"] = output_dir;
    j["store_raw"] = store_raw;
    json faults = json::array();
    for (const auto& f : fault_sims)
        faults.push_back({{"sim_id", f.sim_id},
                          {"crash_at_step", f.crash_at_step},
                          {"attempts", f.attempts}});
    j["fault_sims"] = faults;
    return j.dump(2);
}

void StudyConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file: " + path);
    out << to_json_text() << "\n";
}

void StudyConfig::validate() const {
    if (study_id.empty()) throw ConfigError("study_id must not be empty");
    if (mesh.nx == 0 || mesh.ny == 0) throw ConfigError("mesh dimensions must be positive");
    if (timesteps == 0) throw ConfigError("timesteps must be positive");
    if (fields.empty()) throw ConfigError("at least one field is required");
    if (n_simulations == 0) throw ConfigError("n_simulations must be positive");
    if (server.ranks == 0) throw ConfigError("server.ranks must be positive");
    if (mesh.n_cells() < server.ranks)
        throw ConfigError("more server ranks than mesh cells");
    if (launcher.max_concurrent == 0)
        throw ConfigError("launcher.max_concurrent must be positive");
    for (const auto& c : launcher.cap_schedule) {
        if (c.cap == 0) throw ConfigError("cap_schedule entries must have cap >= 1");
    }
    if (!(simulation.dt > 0.0)) throw ConfigError("simulation.dt must be positive");
    if (!(simulation.domain_x > 0.0 && simulation.domain_y > 0.0))
        throw ConfigError("simulation domain must be positive");
    if (simulation.diffusivity < 0.0)
        throw ConfigError("simulation.diffusivity must be non-negative");
    statistics.validate();
    if (statistics.declared_n < 2)
        throw ConfigError("statistics.declared_n must be >= 2 (or n_simulations >= 2)");
}

std::uint64_t StudyConfig::state_hash() const {
    std::ostringstream ss;
    ss << study_id << '|' << mesh.nx << 'x' << mesh.ny << '|' << timesteps << '|'
       << n_simulations << '|' << server.ranks << '|' << seed << '|';
    for (const auto& f : fields) ss << f << ',';
    ss << '|';
    char buf[32];
    for (double a : statistics.quantile_orders) {
        std::snprintf(buf, sizeof buf, "%.17g,", a);
        ss << buf;
    }
    ss << '|';
    for (double t : statistics.thresholds) {
        std::snprintf(buf, sizeof buf, "%.17g,", t);
        ss << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", statistics.gain_c);
    ss << '|' << buf << '|' << static_cast<int>(statistics.schedule.kind) << ':';
    std::snprintf(buf, sizeof buf, "%.17g", statistics.schedule.constant_gamma);
    ss << buf << '|' << statistics.declared_n;
    return fnv1a(ss.str());
}

} // namespace instat
