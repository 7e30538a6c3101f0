#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "instat/bytes.hpp"
#include "instat/config.hpp"
#include "instat/field/field_stats.hpp"
#include "instat/proto/message.hpp"
#include "instat/proto/partition.hpp"

namespace instat::server {

// Statistics state owned by one server rank: the field accumulator arrays
// for its cell block plus the processed-message ledger keyed by
// (simulation, field, timestep). A client sends one data message per rank
// per (field, timestep) covering the whole block, so ledger granularity and
// message granularity coincide and a replayed message is discarded whole.
//
// Single-owner: exactly one thread mutates a RankCore; there is no locking
// here and no communication with sibling ranks.
class RankCore {
public:
    RankCore(const StudyConfig& cfg, const proto::PartitionMap& map, std::uint32_t rank);

    // Apply one data message. Returns true if applied, false if the ledger
    // already holds its key (duplicate delivery). Malformed messages throw
    // ProtocolError; non-finite payloads throw DataQualityError.
    bool apply(const proto::Message& data);

    bool complete() const { return applied_ == expected_keys(); }
    bool sim_complete(std::uint32_t sim) const;
    std::vector<std::uint32_t> completed_sims() const;

    std::uint64_t applied() const { return applied_; }
    std::uint64_t duplicates() const { return duplicates_; }
    std::uint64_t expected_keys() const {
        return static_cast<std::uint64_t>(n_sims_) * fields_.size() * n_timesteps_;
    }
    std::uint64_t ledger_population() const;

    std::uint32_t rank() const { return rank_; }
    const CellRange& range() const { return range_; }
    const std::string& study_id() const { return study_id_; }

    field::FieldStatistics& field(const std::string& name);
    const field::FieldStatistics& field(const std::string& name) const;
    const std::vector<std::string>& field_names() const { return field_names_; }

    // Byte offset of this rank's applied-message log at the last checkpoint;
    // restore truncates the log back to it so replays never duplicate entries.
    std::uint64_t msglog_offset() const { return msglog_offset_; }
    void set_msglog_offset(std::uint64_t off) { msglog_offset_ = off; }

    std::size_t footprint_bytes() const;

    void serialize(ByteWriter& w) const;
    void restore(ByteReader& r);
    bool state_equals(const RankCore& other) const;

private:
    std::size_t field_index(const std::string& name) const;
    std::size_t ledger_index(std::uint32_t sim, std::size_t field_idx,
                             std::uint32_t timestep) const;

    std::string study_id_;
    std::uint32_t rank_;
    CellRange range_;
    std::uint32_t n_sims_;
    std::uint32_t n_timesteps_;
    std::vector<std::string> field_names_;
    std::shared_ptr<const stats::StatisticsConfig> stats_cfg_;
    std::vector<field::FieldStatistics> fields_;

    std::vector<std::uint64_t> ledger_;          // bitmap, fixed size
    std::vector<std::uint32_t> per_sim_applied_; // keys applied per simulation
    std::uint64_t applied_ = 0;
    std::uint64_t duplicates_ = 0;
    std::uint64_t msglog_offset_ = 0;
};

} // namespace instat::server
