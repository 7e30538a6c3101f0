#include "instat/client/session.hpp"

#include <set>
#include <thread>

namespace instat::client {

ClientSession ClientSession::initialize(std::uint32_t simulation_id, std::string study_id,
                                        std::vector<FieldSpec> fields,
                                        const std::vector<proto::Endpoint>& endpoints,
                                        std::uint64_t n_cells, RetryPolicy retry) {
    if (fields.empty()) throw ConfigError("client needs at least one field");
    if (endpoints.empty()) throw ConfigError("client needs at least one server endpoint");
    proto::ignore_sigpipe();

    const proto::PartitionMap map(n_cells, static_cast<std::uint32_t>(endpoints.size()));

    ClientSession session;
    session.simulation_id_ = simulation_id;
    session.study_id_ = std::move(study_id);
    session.retry_ = retry;

    std::set<std::uint32_t> needed_ranks;
    for (const auto& f : fields) {
        if (f.local_range.empty() || f.local_range.end > n_cells)
            throw ConfigError("field " + f.name + ": cell interval outside the study mesh");
        auto routed = map.route(f.local_range);
        for (const auto& chunk : routed) needed_ranks.insert(chunk.rank);
        session.routing_.emplace(f.name, std::move(routed));
    }
    session.fields_ = std::move(fields);

    for (std::uint32_t rank : needed_ranks) {
        proto::TcpStream stream;
        int attempt = 0;
        for (;;) {
            try {
                stream = proto::TcpStream::connect(endpoints[rank], retry.connect_timeout_ms);
                break;
            } catch (const IoError&) {
                if (++attempt >= retry.connect_attempts) throw;
                std::this_thread::sleep_for(std::chrono::milliseconds(retry.retry_delay_ms));
            }
        }
        stream.send_message(
            proto::Message::hello_msg(session.study_id_, session.simulation_id_));
        const auto welcome = stream.read_message(retry.io_timeout_ms);
        if (!welcome || welcome->kind != proto::MsgKind::welcome)
            throw ProtocolError("rank " + std::to_string(rank) +
                                " rejected the handshake");
        if (welcome->study_id != session.study_id_)
            throw ProtocolError("rank " + std::to_string(rank) + " serves study '" +
                                welcome->study_id + "', expected '" + session.study_id_ + "'");
        session.conns_.emplace(rank, std::move(stream));
    }
    session.open_ = true;
    return session;
}

ClientSession::~ClientSession() {
    if (open_) {
        try {
            finalize();
        } catch (...) {
            // Destructor cleanup is best effort; the launcher-side ledger
            // copes with an abrupt exit.
        }
    }
}

void ClientSession::send(std::uint32_t timestep, const std::string& field_name,
                         std::span<const double> values) {
    if (!open_) throw ProtocolError("send on a finalized session");
    const auto routed = routing_.find(field_name);
    if (routed == routing_.end()) throw ConfigError("unknown field: " + field_name);
    const FieldSpec* spec = nullptr;
    for (const auto& f : fields_) {
        if (f.name == field_name) spec = &f;
    }
    if (values.empty()) throw ConfigError("send: empty field payload");
    if (values.size() != spec->local_range.size())
        throw ConfigError("send: payload length " + std::to_string(values.size()) +
                          " does not match the declared interval of " +
                          std::to_string(spec->local_range.size()) + " cells");

    for (const auto& chunk : routed->second) {
        proto::Message m;
        m.kind = proto::MsgKind::data;
        m.study_id = study_id_;
        m.simulation_id = simulation_id_;
        m.field_name = field_name;
        m.timestep = timestep;
        m.cell_offset = chunk.cells.begin;
        const std::size_t local = chunk.cells.begin - spec->local_range.begin;
        m.values.assign(values.begin() + static_cast<long>(local),
                        values.begin() + static_cast<long>(local + chunk.cells.size()));
        conns_.at(chunk.rank).send_message(m);
    }
}

void ClientSession::finalize() {
    if (!open_) return;
    open_ = false;
    for (auto& [rank, conn] : conns_) {
        try {
            conn.send_message(proto::Message::goodbye_msg(study_id_, simulation_id_));
            // The ack arrives after the rank consumed everything we sent on
            // this connection, making finalize a flush barrier.
            const auto ack = conn.read_message(retry_.io_timeout_ms);
            if (ack && ack->kind != proto::MsgKind::ack)
                throw ProtocolError("rank " + std::to_string(rank) +
                                    " answered goodbye with the wrong kind");
        } catch (const IoError&) {
            // Rank already gone; nothing left to flush.
        }
        conn.close();
    }
    conns_.clear();
}

} // namespace instat::client
