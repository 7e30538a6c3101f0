#include "instat/server/checkpoint.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

namespace instat::server {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x314B4349; // "ICK1"
constexpr std::uint16_t kCheckpointVersion = 1;

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                static_cast<uInt>(bytes.size())));
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

std::string rank_file_name(std::uint32_t rank) {
    return "rank_" + std::to_string(rank) + ".ckpt";
}

} // namespace

std::string checkpoint_root(const std::string& study_dir) { return study_dir + "/ckpt"; }

std::string checkpoint_epoch_dir(const std::string& study_dir, std::uint64_t epoch) {
    return checkpoint_root(study_dir) + "/epoch_" + std::to_string(epoch);
}

void write_rank_checkpoint(const std::string& study_dir, std::uint64_t epoch,
                           const RankCore& core, std::uint64_t config_hash) {
    const fs::path dir = checkpoint_epoch_dir(study_dir, epoch);
    fs::create_directories(dir);

    ByteWriter w;
    w.u32(kCheckpointMagic);
    w.u16(kCheckpointVersion);
    w.u16(0);
    w.u64(epoch);
    w.u64(config_hash);
    core.serialize(w);
    ByteWriter tail;
    tail.u32(crc_of(w.data()));
    std::vector<std::uint8_t> bytes = w.take();
    bytes.insert(bytes.end(), tail.data().begin(), tail.data().end());

    write_file_atomic(dir / rank_file_name(core.rank()), bytes);
}

void commit_checkpoint(const std::string& study_dir, CheckpointManifest manifest) {
    const fs::path root = checkpoint_root(study_dir);
    const fs::path dir = checkpoint_epoch_dir(study_dir, manifest.epoch);
    fs::create_directories(dir);
    manifest.created_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();

    json j;
    j["epoch"] = manifest.epoch;
    j["config_hash"] = manifest.config_hash;
    j["complete"] = manifest.complete;
    j["stop_reason"] = manifest.stop_reason;
    j["completed_sims"] = manifest.completed_sims;
    j["rank_files"] = manifest.rank_files;
    j["applied"] = manifest.applied;
    j["duplicates"] = manifest.duplicates;
    j["created_ms"] = manifest.created_ms;
    const std::string text = j.dump(2);
    write_file_atomic(dir / "manifest.json",
                      std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                text.size()));

    const std::string latest = "epoch_" + std::to_string(manifest.epoch);
    write_file_atomic(root / "LATEST",
                      std::span(reinterpret_cast<const std::uint8_t*>(latest.data()),
                                latest.size()));

    // Older epochs are superseded; drop them.
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("epoch_", 0) == 0 && name != latest) {
            std::error_code ec;
            fs::remove_all(entry.path(), ec);
        }
    }
}

std::optional<CheckpointManifest> read_latest_manifest(const std::string& study_dir) {
    const fs::path latest_path = fs::path(checkpoint_root(study_dir)) / "LATEST";
    std::ifstream latest(latest_path);
    if (!latest) return std::nullopt;
    std::string epoch_name;
    latest >> epoch_name;
    const fs::path manifest_path =
        fs::path(checkpoint_root(study_dir)) / epoch_name / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw CheckpointError("LATEST points at missing manifest " + manifest_path.string());
    json j;
    try {
        in >> j;
        CheckpointManifest m;
        m.epoch = j.at("epoch").get<std::uint64_t>();
        m.config_hash = j.at("config_hash").get<std::uint64_t>();
        m.complete = j.at("complete").get<bool>();
        m.stop_reason = j.at("stop_reason").get<std::string>();
        m.completed_sims = j.at("completed_sims").get<std::vector<std::uint32_t>>();
        m.rank_files = j.at("rank_files").get<std::vector<std::string>>();
        m.applied = j.at("applied").get<std::uint64_t>();
        m.duplicates = j.at("duplicates").get<std::uint64_t>();
        m.created_ms = j.at("created_ms").get<std::int64_t>();
        return m;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint manifest: ") + e.what());
    }
}

void restore_rank_checkpoint(const std::string& study_dir, std::uint64_t epoch, RankCore& core,
                             std::uint64_t config_hash) {
    const fs::path file =
        fs::path(checkpoint_epoch_dir(study_dir, epoch)) / rank_file_name(core.rank());
    const std::vector<std::uint8_t> bytes = read_file(file);
    if (bytes.size() < 4 + 24) throw CheckpointError("checkpoint file truncated: " + file.string());

    const std::size_t body_len = bytes.size() - 4;
    const std::span<const std::uint8_t> all(bytes);
    ByteReader tail(all.subspan(body_len));
    const std::uint32_t stored_crc = tail.u32();
    if (crc_of(all.first(body_len)) != stored_crc)
        throw CheckpointError("checkpoint checksum failure: " + file.string());

    ByteReader r(all.first(body_len));
    try {
        if (r.u32() != kCheckpointMagic)
            throw CheckpointError("not a checkpoint file: " + file.string());
        if (r.u16() != kCheckpointVersion)
            throw CheckpointError("checkpoint version mismatch: " + file.string());
        r.u16();
        if (r.u64() != epoch) throw CheckpointError("checkpoint epoch mismatch");
        if (r.u64() != config_hash)
            throw CheckpointError("checkpoint was written under a different configuration");
        core.restore(r);
    } catch (const ByteUnderflow&) {
        throw CheckpointError("checkpoint file truncated: " + file.string());
    }
}

} // namespace instat::server
