#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "instat/cell_range.hpp"
#include "instat/proto/partition.hpp"
#include "instat/proto/socket.hpp"

namespace instat::client {

struct FieldSpec {
    std::string name;
    CellRange local_range; // global cell indices this client produces
};

struct RetryPolicy {
    int connect_attempts = 40;
    int retry_delay_ms = 250;
    int connect_timeout_ms = 2000;
    int io_timeout_ms = 60000;
};

// Simulation-side session: initialize connects to every server rank owning a
// slice of the client's cells (with handshake), send() streams one timestep
// of one field split along the partition, finalize() says goodbye and waits
// for the flush acknowledgements. Plain sequential API, no callbacks.
class ClientSession {
public:
    static ClientSession initialize(std::uint32_t simulation_id, std::string study_id,
                                    std::vector<FieldSpec> fields,
                                    const std::vector<proto::Endpoint>& endpoints,
                                    std::uint64_t n_cells, RetryPolicy retry = {});

    // Movable, single-owner.
    ClientSession(ClientSession&&) = default;
    ClientSession& operator=(ClientSession&&) = default;
    ClientSession(const ClientSession&) = delete;
    ClientSession& operator=(const ClientSession&) = delete;
    ~ClientSession();

    void send(std::uint32_t timestep, const std::string& field_name,
              std::span<const double> values);

    // Idempotent; the session is unusable afterwards.
    void finalize();

    bool open() const { return open_; }
    std::size_t connection_count() const { return conns_.size(); }
    std::uint32_t simulation_id() const { return simulation_id_; }
    const std::string& study_id() const { return study_id_; }

private:
    ClientSession() = default;

    std::uint32_t simulation_id_ = 0;
    std::string study_id_;
    std::vector<FieldSpec> fields_;
    std::map<std::string, std::vector<proto::RoutedChunk>> routing_;
    std::map<std::uint32_t, proto::TcpStream> conns_;
    RetryPolicy retry_;
    bool open_ = false;
};

} // namespace instat::client
