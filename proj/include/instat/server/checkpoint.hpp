#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instat/server/rank_core.hpp"

namespace instat::server {

// One committed checkpoint epoch: per-rank state files plus a manifest.
// Commit order is rank files -> manifest.json -> LATEST (each written to a
// temp name and renamed), so LATEST always points at a complete epoch and a
// crash mid-checkpoint leaves the previous epoch intact.
struct CheckpointManifest {
    std::uint64_t epoch = 0;
    std::uint64_t config_hash = 0;
    bool complete = false;
    std::string stop_reason; // "", "idle_timeout"
    std::vector<std::uint32_t> completed_sims;
    std::vector<std::string> rank_files;
    std::uint64_t applied = 0;
    std::uint64_t duplicates = 0;
    std::int64_t created_ms = 0;
};

std::string checkpoint_root(const std::string& study_dir);
std::string checkpoint_epoch_dir(const std::string& study_dir, std::uint64_t epoch);

// Serialize one rank's state into <epoch dir>/rank_<r>.ckpt (temp + rename).
// Safe to call concurrently for different ranks.
void write_rank_checkpoint(const std::string& study_dir, std::uint64_t epoch,
                           const RankCore& core, std::uint64_t config_hash);

// Write the manifest for an epoch whose rank files are already on disk and
// flip LATEST to it; prunes older epochs.
void commit_checkpoint(const std::string& study_dir, CheckpointManifest manifest);

std::optional<CheckpointManifest> read_latest_manifest(const std::string& study_dir);

// Restore one rank from the given epoch. Throws CheckpointError on version,
// truncation, checksum or configuration mismatches.
void restore_rank_checkpoint(const std::string& study_dir, std::uint64_t epoch, RankCore& core,
                             std::uint64_t config_hash);

} // namespace instat::server
