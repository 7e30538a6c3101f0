#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instat/error.hpp"
#include "instat/proto/codec.hpp"
#include "instat/proto/message.hpp"

namespace instat::proto {

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    std::string to_string() const { return host + ":" + std::to_string(port); }
    static Endpoint parse(const std::string& s);

    bool operator==(const Endpoint&) const = default;
};

// Process-wide SIGPIPE suppression; a dying peer must surface as an error
// code on the writing call, not kill the process.
void ignore_sigpipe();

// Blocking TCP stream with frame helpers. Sends block when the kernel
// buffers on both sides are full, which is the transport's backpressure
// contract; reads can be bounded by a poll timeout.
class TcpStream {
public:
    TcpStream() = default;
    explicit TcpStream(int fd) : fd_(fd) {}
    ~TcpStream();
    TcpStream(TcpStream&& other) noexcept;
    TcpStream& operator=(TcpStream&& other) noexcept;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    static TcpStream connect(const Endpoint& ep, int timeout_ms);

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }
    void close();

    void send_all(std::span<const std::uint8_t> bytes);
    void send_message(const Message& m) { send_all(encode_message(m)); }

    // Blocking frame read. Throws IoError on socket failure or timeout and
    // ProtocolError on an undecodable frame; returns nullopt on clean EOF.
    std::optional<Message> read_message(int timeout_ms);

    // Append whatever is available to buf; false on EOF.
    bool recv_available(std::vector<std::uint8_t>& buf);

private:
    void recv_exact(std::uint8_t* out, std::size_t n, int timeout_ms);

    int fd_ = -1;
};

class TcpListener {
public:
    TcpListener() = default;
    ~TcpListener();
    TcpListener(TcpListener&& other) noexcept;
    TcpListener& operator=(TcpListener&& other) noexcept;
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    // port 0 binds an ephemeral port; port() reports the actual one.
    static TcpListener bind(const std::string& host, std::uint16_t port);

    std::uint16_t port() const { return port_; }
    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }
    void close();

    // Wait up to timeout_ms for a connection.
    std::optional<TcpStream> accept(int timeout_ms);

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

} // namespace instat::proto
