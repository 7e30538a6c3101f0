#pragma once

#include <optional>
#include <string>

#include "instat/config.hpp"
#include "instat/proto/socket.hpp"

namespace instat::server {

struct ServerOptions {
    std::string study_dir;
    bool restore = false;
    std::optional<proto::Endpoint> launcher_endpoint;
    std::string host = "127.0.0.1";
};

struct ServerResult {
    enum class Stop { complete, idle_timeout };
    Stop stop = Stop::complete;
    std::uint64_t applied = 0;
    std::uint64_t duplicates = 0;
};

// Run the partitioned statistics server until the study's expected messages
// are all applied (exports final statistics, returns Stop::complete) or no
// data arrives for the idle timeout while the launcher is unreachable
// (checkpoints and returns Stop::idle_timeout).
//
// Each rank runs one worker thread owning its cell block: accept loop,
// message dispatch, statistics updates and its slice of every checkpoint.
// Ranks never exchange state; coordination is limited to the checkpoint
// barrier and stop flag.
ServerResult run_server(const StudyConfig& cfg, const ServerOptions& opts);

} // namespace instat::server
