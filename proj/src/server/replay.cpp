#include "instat/server/replay.hpp"

#include <algorithm>
#include <fstream>
#include <memory>

#include "instat/proto/codec.hpp"
#include "instat/proto/partition.hpp"
#include "instat/server/field_export.hpp"
#include "instat/server/rank_core.hpp"

namespace instat::server {

std::vector<proto::Message> read_message_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open message log " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    std::vector<proto::Message> out;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        auto decoded = proto::decode_message(std::span(bytes).subspan(pos));
        if (const auto* err = std::get_if<proto::DecodeError>(&decoded))
            throw IoError("message log " + path + " corrupt at byte " + std::to_string(pos) +
                          ": " + proto::to_string(*err));
        auto& d = std::get<proto::Decoded>(decoded);
        pos += d.frame_size;
        out.push_back(std::move(d.message));
    }
    return out;
}

ReplayResult replay_message_logs(const StudyConfig& cfg, const std::string& msglog_dir,
                                 const std::string& export_dir) {
    const proto::PartitionMap map(cfg.mesh.n_cells(), cfg.server.ranks);

    std::vector<proto::Message> messages;
    for (std::uint32_t r = 0; r < cfg.server.ranks; ++r) {
        auto part = read_message_log(msglog_dir + "/rank_" + std::to_string(r) + ".log");
        messages.insert(messages.end(), std::make_move_iterator(part.begin()),
                        std::make_move_iterator(part.end()));
    }
    std::sort(messages.begin(), messages.end(), [](const auto& a, const auto& b) {
        return std::tie(a.simulation_id, a.field_name, a.timestep, a.cell_offset) <
               std::tie(b.simulation_id, b.field_name, b.timestep, b.cell_offset);
    });

    std::vector<std::unique_ptr<RankCore>> cores;
    for (std::uint32_t r = 0; r < cfg.server.ranks; ++r)
        cores.push_back(std::make_unique<RankCore>(cfg, map, r));

    ReplayResult result;
    for (const auto& m : messages) {
        RankCore& core = *cores[map.owner(m.cell_offset)];
        if (core.apply(m)) {
            ++result.applied;
        } else {
            ++result.duplicates;
        }
    }
    result.complete = true;
    for (const auto& core : cores) result.complete = result.complete && core->complete();

    std::vector<RankCore*> rank_ptrs;
    for (auto& c : cores) rank_ptrs.push_back(c.get());
    export_study(cfg, rank_ptrs, export_dir, result.complete);
    return result;
}

} // namespace instat::server
