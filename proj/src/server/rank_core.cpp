#include "instat/server/rank_core.hpp"

#include <bit>

namespace instat::server {

RankCore::RankCore(const StudyConfig& cfg, const proto::PartitionMap& map, std::uint32_t rank)
    : study_id_(cfg.study_id),
      rank_(rank),
      range_(map.rank_range(rank)),
      n_sims_(cfg.n_simulations),
      n_timesteps_(cfg.timesteps),
      field_names_(cfg.fields),
      stats_cfg_(std::make_shared<stats::StatisticsConfig>(cfg.statistics)) {
    fields_.reserve(field_names_.size());
    for (const auto& name : field_names_) {
        fields_.emplace_back(name, range_, n_timesteps_, stats_cfg_);
    }
    const std::uint64_t keys = expected_keys();
    ledger_.assign((keys + 63) / 64, 0);
    per_sim_applied_.assign(n_sims_, 0);
}

std::size_t RankCore::field_index(const std::string& name) const {
    for (std::size_t i = 0; i < field_names_.size(); ++i) {
        if (field_names_[i] == name) return i;
    }
    throw ProtocolError("unknown field: " + name);
}

std::size_t RankCore::ledger_index(std::uint32_t sim, std::size_t field_idx,
                                   std::uint32_t timestep) const {
    return (static_cast<std::size_t>(sim) * field_names_.size() + field_idx) * n_timesteps_ +
           timestep;
}

bool RankCore::apply(const proto::Message& m) {
    if (m.kind != proto::MsgKind::data) throw ProtocolError("apply: not a data message");
    if (m.study_id != study_id_)
        throw ProtocolError("apply: message for study " + m.study_id);
    if (m.simulation_id >= n_sims_)
        throw ProtocolError("apply: simulation id " + std::to_string(m.simulation_id) +
                            " outside the declared ensemble");
    if (m.timestep >= n_timesteps_) throw ProtocolError("apply: timestep out of range");
    const std::size_t fidx = field_index(m.field_name);
    if (m.cell_offset != range_.begin || m.values.size() != range_.size())
        throw ProtocolError("apply: chunk does not cover this rank's block");

    const std::size_t key = ledger_index(m.simulation_id, fidx, m.timestep);
    std::uint64_t& word = ledger_[key / 64];
    const std::uint64_t bit = 1ull << (key % 64);
    if (word & bit) {
        ++duplicates_;
        return false;
    }
    fields_[fidx].ingest_chunk(m.timestep, m.cell_offset, m.values);
    word |= bit;
    ++applied_;
    ++per_sim_applied_[m.simulation_id];
    return true;
}

bool RankCore::sim_complete(std::uint32_t sim) const {
    return sim < n_sims_ &&
           per_sim_applied_[sim] == field_names_.size() * static_cast<std::size_t>(n_timesteps_);
}

std::vector<std::uint32_t> RankCore::completed_sims() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t s = 0; s < n_sims_; ++s) {
        if (sim_complete(s)) out.push_back(s);
    }
    return out;
}

std::uint64_t RankCore::ledger_population() const {
    std::uint64_t pop = 0;
    for (std::uint64_t w : ledger_) pop += std::popcount(w);
    return pop;
}

field::FieldStatistics& RankCore::field(const std::string& name) {
    return fields_[field_index(name)];
}

const field::FieldStatistics& RankCore::field(const std::string& name) const {
    return fields_[field_index(name)];
}

std::size_t RankCore::footprint_bytes() const {
    std::size_t total = ledger_.capacity() * sizeof(std::uint64_t) +
                        per_sim_applied_.capacity() * sizeof(std::uint32_t);
    for (const auto& f : fields_) total += f.footprint_bytes();
    return total;
}

void RankCore::serialize(ByteWriter& w) const {
    w.str(study_id_);
    w.u32(rank_);
    w.u64(range_.begin);
    w.u64(range_.end);
    w.u32(n_sims_);
    w.u32(n_timesteps_);
    w.u64(applied_);
    w.u64(duplicates_);
    w.u64(msglog_offset_);
    w.u32(static_cast<std::uint32_t>(ledger_.size()));
    for (std::uint64_t word : ledger_) w.u64(word);
    w.u32_array(per_sim_applied_);
    w.u32(static_cast<std::uint32_t>(fields_.size()));
    for (const auto& f : fields_) f.serialize(w);
}

void RankCore::restore(ByteReader& r) {
    const std::string study = r.str();
    const std::uint32_t rank = r.u32();
    const CellRange range{r.u64(), r.u64()};
    const std::uint32_t sims = r.u32();
    const std::uint32_t steps = r.u32();
    if (study != study_id_ || rank != rank_ || range != range_ || sims != n_sims_ ||
        steps != n_timesteps_)
        throw CheckpointError("rank checkpoint does not match the study configuration");
    applied_ = r.u64();
    duplicates_ = r.u64();
    msglog_offset_ = r.u64();
    const std::uint32_t words = r.u32();
    if (words != ledger_.size()) throw CheckpointError("ledger size mismatch");
    for (auto& word : ledger_) word = r.u64();
    r.u32_array(per_sim_applied_);
    const std::uint32_t nfields = r.u32();
    if (nfields != fields_.size()) throw CheckpointError("field count mismatch");
    for (auto& f : fields_) f.restore(r);
}

bool RankCore::state_equals(const RankCore& other) const {
    if (applied_ != other.applied_ || ledger_ != other.ledger_ ||
        per_sim_applied_ != other.per_sim_applied_ || fields_.size() != other.fields_.size())
        return false;
    for (std::size_t i = 0; i < fields_.size(); ++i) {
        if (!fields_[i].state_equals(other.fields_[i])) return false;
    }
    return true;
}

} // namespace instat::server
