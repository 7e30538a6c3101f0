#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace instat::proto {

enum class MsgKind : std::uint8_t {
    hello = 1,     // client -> rank: study_id + simulation_id handshake
    welcome = 2,   // rank -> client: study_id echo
    data = 3,      // client -> rank: one field chunk for one timestep
    goodbye = 4,   // client -> rank: stream complete
    heartbeat = 5, // server -> launcher: liveness
    ack = 6,       // rank -> client: goodbye acknowledged (flush barrier)
};

// One wire message. Non-data kinds use only kind/study_id/simulation_id.
// Within a study, (simulation_id, field_name, timestep, cell_offset) uniquely
// identifies a data message.
struct Message {
    MsgKind kind = MsgKind::hello;
    std::string study_id;
    std::uint32_t simulation_id = 0;

    // data only:
    std::string field_name;
    std::uint32_t timestep = 0;
    std::uint64_t cell_offset = 0;
    std::vector<double> values;

    bool operator==(const Message&) const = default;

    static Message hello_msg(std::string study, std::uint32_t sim) {
        return {MsgKind::hello, std::move(study), sim, {}, 0, 0, {}};
    }
    static Message welcome_msg(std::string study, std::uint32_t sim) {
        return {MsgKind::welcome, std::move(study), sim, {}, 0, 0, {}};
    }
    static Message goodbye_msg(std::string study, std::uint32_t sim) {
        return {MsgKind::goodbye, std::move(study), sim, {}, 0, 0, {}};
    }
    static Message heartbeat_msg(std::string study, std::uint32_t sim) {
        return {MsgKind::heartbeat, std::move(study), sim, {}, 0, 0, {}};
    }
    static Message ack_msg(std::string study, std::uint32_t sim) {
        return {MsgKind::ack, std::move(study), sim, {}, 0, 0, {}};
    }
};

} // namespace instat::proto
