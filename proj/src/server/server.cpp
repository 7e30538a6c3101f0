#include "instat/server/server.hpp"

#include <atomic>
#include <deque>
#include <memory>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <poll.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include "instat/proto/partition.hpp"
#include "instat/server/checkpoint.hpp"
#include "instat/server/field_export.hpp"
#include "instat/server/rank_core.hpp"
#include "instat/timing.hpp"

namespace instat::server {

namespace fs = std::filesystem;

namespace {

struct ConnState {
    proto::TcpStream stream;
    std::vector<std::uint8_t> buf;
    std::size_t pos = 0;
    bool open = true;
};

void log_line(const std::string& msg) { std::fprintf(stderr, "[server] %s\n", msg.c_str()); }

class ServerProcess {
public:
    ServerProcess(const StudyConfig& cfg, const ServerOptions& opts)
        : cfg_(cfg), opts_(opts), map_(cfg.mesh.n_cells(), cfg.server.ranks) {
        cfg_.validate();
        for (std::uint32_t r = 0; r < cfg_.server.ranks; ++r) {
            cores_.emplace_back(std::make_unique<RankCore>(cfg_, map_, r));
        }
        rank_complete_.resize(cfg_.server.ranks);
        for (auto& f : rank_complete_) f.store(false);
    }

    ServerResult run() {
        const std::uint64_t config_hash = cfg_.state_hash();
        std::uint64_t start_epoch = 1;

        if (opts_.restore) {
            const auto manifest = read_latest_manifest(opts_.study_dir);
            if (!manifest) throw CheckpointError("restore requested but no checkpoint exists");
            if (manifest->config_hash != config_hash)
                throw CheckpointError("checkpoint belongs to a different study configuration");
            for (auto& core : cores_)
                restore_rank_checkpoint(opts_.study_dir, manifest->epoch, *core, config_hash);
            start_epoch = manifest->epoch + 1;
            log_line("restored checkpoint epoch " + std::to_string(manifest->epoch));
        } else if (read_latest_manifest(opts_.study_dir)) {
            throw ConfigError("study directory already holds checkpoints; pass --restore");
        }

        if (cfg_.store_raw) {
            fs::create_directories(opts_.study_dir + "/msglog");
            for (auto& core : cores_) {
                const std::string path =
                    opts_.study_dir + "/msglog/rank_" + std::to_string(core->rank()) + ".log";
                // Drop any bytes written after the restored checkpoint; they
                // will be re-logged when the messages are replayed.
                if (opts_.restore && fs::exists(path)) {
                    fs::resize_file(path, core->msglog_offset());
                } else if (!opts_.restore) {
                    std::error_code ec;
                    fs::remove(path, ec);
                }
                msglog_paths_.push_back(path);
            }
        }

        // Bind every rank up front so failures surface before anything runs.
        for (std::uint32_t r = 0; r < cfg_.server.ranks; ++r) {
            const std::uint16_t port =
                cfg_.server.base_port == 0
                    ? 0
                    : static_cast<std::uint16_t>(cfg_.server.base_port + r);
            listeners_.push_back(proto::TcpListener::bind(opts_.host, port));
        }
        publish_endpoints();
        write_pid_file();

        const TimePoint start = Clock::now();
        last_data_ms_.store(0);
        launcher_ok_ms_.store(0);

        std::vector<std::thread> threads;
        threads.reserve(cfg_.server.ranks);
        for (std::uint32_t r = 0; r < cfg_.server.ranks; ++r) {
            threads.emplace_back([this, r, start] {
                try {
                    rank_main(r, start);
                } catch (const std::exception& e) {
                    {
                        std::unique_lock lock(fatal_m_);
                        fatal_msg_ = "rank " + std::to_string(r) + ": " + e.what();
                    }
                    fatal_.store(true);
                    stop_.store(true);
                    ckpt_cv_.notify_all();
                }
            });
        }

        PeriodicDeadline heartbeat(Ms(cfg_.server.heartbeat_period_ms), start);
        PeriodicDeadline checkpoint(Ms(cfg_.server.checkpoint_period_ms),
                                    start + Ms(cfg_.server.checkpoint_period_ms));
        std::uint64_t epoch = start_epoch;
        ServerResult result;

        for (;;) {
            const TimePoint now = Clock::now();
            if (fatal_.load()) break;
            if (all_ranks_complete()) {
                result.stop = ServerResult::Stop::complete;
                break;
            }
            if (idle_expired(start, now)) {
                result.stop = ServerResult::Stop::idle_timeout;
                break;
            }
            if (heartbeat.due(now)) send_heartbeat(start, now);
            if (checkpoint.due(now)) run_checkpoint_barrier(epoch++, config_hash);
            std::this_thread::sleep_for(Ms(20));
        }

        stop_.store(true);
        ckpt_cv_.notify_all();
        for (auto& t : threads) t.join();
        if (fatal_.load()) {
            std::unique_lock lock(fatal_m_);
            throw IoError("server worker failed: " + fatal_msg_);
        }

        // Threads are gone; take the final checkpoint directly.
        const bool complete = result.stop == ServerResult::Stop::complete;
        write_final_checkpoint(epoch, config_hash, complete,
                               complete ? "" : "idle_timeout");
        if (complete) {
            std::vector<RankCore*> rank_ptrs;
            for (auto& c : cores_) rank_ptrs.push_back(c.get());
            export_study(cfg_, rank_ptrs, opts_.study_dir + "/export", true);
        }
        for (const auto& core : cores_) {
            result.applied += core->applied();
            result.duplicates += core->duplicates();
        }
        log_line(std::string("stopping: ") + (complete ? "study complete" : "idle timeout") +
                 ", applied " + std::to_string(result.applied) + ", duplicates " +
                 std::to_string(result.duplicates));
        return result;
    }

private:
    void publish_endpoints() {
        const std::string path = opts_.study_dir + "/endpoints.txt";
        {
            std::ofstream out(path + ".tmp");
            if (!out) throw IoError("cannot write endpoints file");
            for (const auto& l : listeners_) out << opts_.host << ":" << l.port() << "\n";
        }
        fs::rename(path + ".tmp", path);
    }

    void write_pid_file() {
        std::ofstream out(opts_.study_dir + "/server.pid");
        out << ::getpid() << "\n";
    }

    bool all_ranks_complete() const {
        for (const auto& f : rank_complete_) {
            if (!f.load()) return false;
        }
        return true;
    }

    bool idle_expired(TimePoint start, TimePoint now) const {
        const std::int64_t now_ms = ms_since(start, now);
        const std::int64_t idle = now_ms - last_data_ms_.load();
        if (idle < static_cast<std::int64_t>(cfg_.server.idle_timeout_ms)) return false;
        if (!opts_.launcher_endpoint) return true;
        const std::int64_t unreachable = now_ms - launcher_ok_ms_.load();
        return unreachable >= static_cast<std::int64_t>(cfg_.server.idle_timeout_ms);
    }

    void send_heartbeat(TimePoint start, TimePoint now) {
        if (!opts_.launcher_endpoint) return;
        try {
            if (!hb_conn_.valid())
                hb_conn_ = proto::TcpStream::connect(*opts_.launcher_endpoint, 200);
            hb_conn_.send_message(proto::Message::heartbeat_msg(cfg_.study_id, 0));
            launcher_ok_ms_.store(ms_since(start, now));
        } catch (const Error&) {
            hb_conn_.close();
        }
    }

    // --- checkpoint barrier ---------------------------------------------

    void run_checkpoint_barrier(std::uint64_t epoch, std::uint64_t config_hash) {
        {
            std::unique_lock lock(ckpt_m_);
            ckpt_epoch_ = epoch;
            ckpt_hash_ = config_hash;
            ckpt_arrived_ = 0;
            ckpt_committed_ = false;
        }
        ckpt_cv_.notify_all();
        {
            std::unique_lock lock(ckpt_m_);
            ckpt_cv_.wait(lock, [this] {
                return ckpt_arrived_ == cfg_.server.ranks || stop_.load();
            });
            if (ckpt_arrived_ != cfg_.server.ranks) { // stopping mid-barrier
                ckpt_committed_ = true;
                ckpt_cv_.notify_all();
                return;
            }
        }
        commit_checkpoint(opts_.study_dir, build_manifest(epoch, config_hash, false, ""));
        {
            std::unique_lock lock(ckpt_m_);
            ckpt_committed_ = true;
        }
        ckpt_cv_.notify_all();
    }

    CheckpointManifest build_manifest(std::uint64_t epoch, std::uint64_t config_hash,
                                      bool complete, const std::string& reason) {
        CheckpointManifest m;
        m.epoch = epoch;
        m.config_hash = config_hash;
        m.complete = complete;
        m.stop_reason = reason;
        for (std::uint32_t s = 0; s < cfg_.n_simulations; ++s) {
            bool done = true;
            for (const auto& core : cores_) done = done && core->sim_complete(s);
            if (done) m.completed_sims.push_back(s);
        }
        for (const auto& core : cores_) {
            m.rank_files.push_back("rank_" + std::to_string(core->rank()) + ".ckpt");
            m.applied += core->applied();
            m.duplicates += core->duplicates();
        }
        return m;
    }

    void write_final_checkpoint(std::uint64_t epoch, std::uint64_t config_hash, bool complete,
                                const std::string& reason) {
        // Rank threads have exited and left their message-log offsets behind.
        for (auto& core : cores_) {
            write_rank_checkpoint(opts_.study_dir, epoch, *core, config_hash);
        }
        commit_checkpoint(opts_.study_dir, build_manifest(epoch, config_hash, complete, reason));
    }

    // --- rank worker ------------------------------------------------------

    void rank_main(std::uint32_t r, TimePoint start) {
        RankCore& core = *cores_[r];
        proto::TcpListener& listener = listeners_[r];
        std::vector<ConnState> conns;
        std::ofstream msglog;
        std::uint64_t msglog_bytes = core.msglog_offset();
        if (cfg_.store_raw) {
            msglog.open(msglog_paths_[r], std::ios::binary | std::ios::app);
            if (!msglog) throw IoError("cannot open message log for rank " + std::to_string(r));
        }
        std::uint64_t my_ckpt_epoch = 0;
        rank_complete_[r].store(core.complete());

        while (!stop_.load()) {
            maybe_checkpoint(core, msglog, msglog_bytes, my_ckpt_epoch);
            poll_sockets(listener, conns);

            for (auto& conn : conns) {
                if (!conn.open) continue;
                drain_conn(r, core, conn, msglog, msglog_bytes, start);
            }
            std::erase_if(conns, [](const ConnState& c) { return !c.open; });
        }
        if (msglog.is_open()) msglog.flush();
        core.set_msglog_offset(msglog_bytes);
    }

    void maybe_checkpoint(RankCore& core, std::ofstream& msglog, std::uint64_t msglog_bytes,
                          std::uint64_t& my_epoch) {
        std::uint64_t epoch = 0;
        std::uint64_t hash = 0;
        {
            std::unique_lock lock(ckpt_m_);
            if (ckpt_epoch_ <= my_epoch) return;
            epoch = ckpt_epoch_;
            hash = ckpt_hash_;
        }
        if (msglog.is_open()) msglog.flush();
        core.set_msglog_offset(msglog_bytes);
        write_rank_checkpoint(opts_.study_dir, epoch, core, hash);
        {
            std::unique_lock lock(ckpt_m_);
            my_epoch = epoch;
            ++ckpt_arrived_;
            ckpt_cv_.notify_all();
            ckpt_cv_.wait(lock, [this] { return ckpt_committed_ || stop_.load(); });
        }
    }

    void poll_sockets(proto::TcpListener& listener, std::vector<ConnState>& conns) {
        std::vector<pollfd> fds;
        fds.push_back({listener.fd(), POLLIN, 0});
        for (const auto& c : conns) fds.push_back({c.stream.fd(), POLLIN, 0});
        const int rc = ::poll(fds.data(), fds.size(), 25);
        if (rc <= 0) return;
        if (fds[0].revents & POLLIN) {
            if (auto stream = listener.accept(0)) {
                conns.push_back(ConnState{std::move(*stream), {}, 0, true});
            }
        }
        for (std::size_t i = 0; i + 1 < fds.size() && i < conns.size(); ++i) {
            if (fds[i + 1].revents & (POLLIN | POLLHUP | POLLERR)) {
                try {
                    if (!conns[i].stream.recv_available(conns[i].buf)) conns[i].open = false;
                } catch (const IoError&) {
                    conns[i].open = false;
                }
            }
        }
    }

    void drain_conn(std::uint32_t r, RankCore& core, ConnState& conn, std::ofstream& msglog,
                    std::uint64_t& msglog_bytes, TimePoint start) {
        while (conn.open) {
            const std::size_t avail = conn.buf.size() - conn.pos;
            if (avail < proto::kFrameHeaderSize) break;
            const std::span<const std::uint8_t> view(conn.buf.data() + conn.pos, avail);
            const auto header = proto::peek_body_len(view.first(proto::kFrameHeaderSize));
            if (const auto* err = std::get_if<proto::DecodeError>(&header)) {
                log_line("rank " + std::to_string(r) + ": closing connection: " +
                         proto::to_string(*err));
                conn.open = false;
                break;
            }
            const std::uint32_t body_len = std::get<std::uint32_t>(header);
            if (avail < proto::kFrameHeaderSize + body_len) break;
            const auto frame = view.first(proto::kFrameHeaderSize + body_len);
            auto decoded = proto::decode_message(frame);
            if (const auto* err = std::get_if<proto::DecodeError>(&decoded)) {
                log_line("rank " + std::to_string(r) + ": closing connection: " +
                         proto::to_string(*err));
                conn.open = false;
                break;
            }
            handle_message(r, core, conn, std::get<proto::Decoded>(decoded).message, frame,
                           msglog, msglog_bytes, start);
            conn.pos += frame.size();
        }
        if (conn.pos > (1u << 20) && conn.pos * 2 > conn.buf.size()) {
            conn.buf.erase(conn.buf.begin(), conn.buf.begin() + static_cast<long>(conn.pos));
            conn.pos = 0;
        }
    }

    void handle_message(std::uint32_t r, RankCore& core, ConnState& conn,
                        const proto::Message& m, std::span<const std::uint8_t> frame,
                        std::ofstream& msglog, std::uint64_t& msglog_bytes, TimePoint start) {
        switch (m.kind) {
        case proto::MsgKind::hello:
            if (m.study_id != cfg_.study_id) {
                log_line("rank " + std::to_string(r) + ": hello for unknown study '" +
                         m.study_id + "'");
                conn.open = false;
                return;
            }
            conn.stream.send_message(
                proto::Message::welcome_msg(cfg_.study_id, m.simulation_id));
            return;
        case proto::MsgKind::data: {
            last_data_ms_.store(ms_since(start, Clock::now()));
            try {
                const bool applied = core.apply(m);
                if (applied && msglog.is_open()) {
                    msglog.write(reinterpret_cast<const char*>(frame.data()),
                                 static_cast<std::streamsize>(frame.size()));
                    msglog_bytes += frame.size();
                }
                if (applied && core.complete()) rank_complete_[r].store(true);
            } catch (const Error& e) {
                log_line("rank " + std::to_string(r) + ": rejecting data message: " + e.what());
                conn.open = false;
            }
            return;
        }
        case proto::MsgKind::goodbye:
            try {
                conn.stream.send_message(proto::Message::ack_msg(cfg_.study_id, m.simulation_id));
            } catch (const IoError&) {
            }
            conn.open = false;
            return;
        default:
            log_line("rank " + std::to_string(r) + ": unexpected message kind");
            conn.open = false;
            return;
        }
    }

    StudyConfig cfg_;
    ServerOptions opts_;
    proto::PartitionMap map_;
    std::vector<std::unique_ptr<RankCore>> cores_;
    std::vector<proto::TcpListener> listeners_;
    std::vector<std::string> msglog_paths_;
    std::deque<std::atomic<bool>> rank_complete_;

    std::atomic<bool> stop_{false};
    std::atomic<std::int64_t> last_data_ms_{0};
    std::atomic<std::int64_t> launcher_ok_ms_{0};
    proto::TcpStream hb_conn_;

    std::mutex ckpt_m_;
    std::condition_variable ckpt_cv_;
    std::uint64_t ckpt_epoch_ = 0;
    std::uint64_t ckpt_hash_ = 0;
    std::uint32_t ckpt_arrived_ = 0;
    bool ckpt_committed_ = true;

    std::atomic<bool> fatal_{false};
    std::mutex fatal_m_;
    std::string fatal_msg_;
};

} // namespace

ServerResult run_server(const StudyConfig& cfg, const ServerOptions& opts) {
    proto::ignore_sigpipe();
    fs::create_directories(opts.study_dir);
    ServerProcess process(cfg, opts);
    return process.run();
}

} // namespace instat::server
