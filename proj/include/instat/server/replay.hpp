#pragma once

#include <string>
#include <vector>

#include "instat/config.hpp"
#include "instat/proto/message.hpp"

namespace instat::server {

struct ReplayResult {
    std::uint64_t applied = 0;
    std::uint64_t duplicates = 0;
    bool complete = false;
};

// Decode every frame of one rank's applied-message log.
std::vector<proto::Message> read_message_log(const std::string& path);

// Feed all logged messages through fresh rank cores in canonical order
// (simulation, field, timestep) on a single thread and export the result.
// Two logs holding the same message set export bit-identical commutative
// statistics regardless of the order the live runs processed them in.
ReplayResult replay_message_logs(const StudyConfig& cfg, const std::string& msglog_dir,
                                 const std::string& export_dir);

} // namespace instat::server
