#include "instat/proto/socket.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace instat::proto {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw IoError(what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw IoError("invalid IPv4 address: " + host);
    return addr;
}

void wait_readable(int fd, int timeout_ms, const char* what) {
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc < 0) throw_errno("poll");
    if (rc == 0) throw IoError(std::string(what) + ": timed out");
}

} // namespace

Endpoint Endpoint::parse(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw ConfigError("endpoint must be host:port, got " + s);
    const int port = std::stoi(s.substr(colon + 1));
    if (port <= 0 || port > 65535) throw ConfigError("endpoint port out of range: " + s);
    return {s.substr(0, colon), static_cast<std::uint16_t>(port)};
}

void ignore_sigpipe() {
    static const int installed = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return 0;
    }();
    (void)installed;
}

TcpStream::~TcpStream() { close(); }

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void TcpStream::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpStream TcpStream::connect(const Endpoint& ep, int timeout_ms) {
    ignore_sigpipe();
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    TcpStream stream(fd);

    const sockaddr_in addr = make_addr(ep.host, ep.port);
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
    if (rc != 0) {
        if (errno != EINPROGRESS) throw_errno("connect to " + ep.to_string());
        pollfd p{fd, POLLOUT, 0};
        rc = ::poll(&p, 1, timeout_ms);
        if (rc < 0) throw_errno("poll");
        if (rc == 0) throw IoError("connect to " + ep.to_string() + ": timed out");
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            errno = err;
            throw_errno("connect to " + ep.to_string());
        }
    }
    ::fcntl(fd, F_SETFL, flags);
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return stream;
}

void TcpStream::send_all(std::span<const std::uint8_t> bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n =
            ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("send");
        }
        sent += static_cast<std::size_t>(n);
    }
}

void TcpStream::recv_exact(std::uint8_t* out, std::size_t n, int timeout_ms) {
    std::size_t got = 0;
    while (got < n) {
        wait_readable(fd_, timeout_ms, "recv");
        const ssize_t rc = ::recv(fd_, out + got, n - got, 0);
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw_errno("recv");
        }
        if (rc == 0) throw IoError("recv: connection closed mid-frame");
        got += static_cast<std::size_t>(rc);
    }
}

std::optional<Message> TcpStream::read_message(int timeout_ms) {
    std::uint8_t header[kFrameHeaderSize];
    // Distinguish clean EOF before the first header byte from truncation.
    wait_readable(fd_, timeout_ms, "recv");
    ssize_t rc = ::recv(fd_, header, 1, 0);
    if (rc < 0) throw_errno("recv");
    if (rc == 0) return std::nullopt;
    recv_exact(header + 1, kFrameHeaderSize - 1, timeout_ms);

    const auto body_len_or = peek_body_len(std::span<const std::uint8_t>(header, sizeof header));
    if (const auto* err = std::get_if<DecodeError>(&body_len_or))
        throw ProtocolError(std::string("frame header: ") + to_string(*err));
    const std::uint32_t body_len = std::get<std::uint32_t>(body_len_or);

    std::vector<std::uint8_t> frame(kFrameHeaderSize + body_len);
    std::memcpy(frame.data(), header, kFrameHeaderSize);
    recv_exact(frame.data() + kFrameHeaderSize, body_len, timeout_ms);

    auto decoded = decode_message(frame);
    if (const auto* err = std::get_if<DecodeError>(&decoded))
        throw ProtocolError(std::string("frame body: ") + to_string(*err));
    return std::get<Decoded>(std::move(decoded)).message;
}

bool TcpStream::recv_available(std::vector<std::uint8_t>& buf) {
    std::uint8_t chunk[64 * 1024];
    const ssize_t rc = ::recv(fd_, chunk, sizeof chunk, 0);
    if (rc < 0) {
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) return true;
        throw_errno("recv");
    }
    if (rc == 0) return false;
    buf.insert(buf.end(), chunk, chunk + rc);
    return true;
}

TcpListener::~TcpListener() { close(); }

TcpListener::TcpListener(TcpListener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
    other.fd_ = -1;
}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        port_ = other.port_;
        other.fd_ = -1;
    }
    return *this;
}

void TcpListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpListener TcpListener::bind(const std::string& host, std::uint16_t port) {
    ignore_sigpipe();
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    TcpListener listener;
    listener.fd_ = fd;

    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const sockaddr_in addr = make_addr(host, port);
    if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
        throw_errno("bind " + host + ":" + std::to_string(port));
    if (::listen(fd, 128) != 0) throw_errno("listen");

    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    listener.port_ = ntohs(bound.sin_port);
    return listener;
}

std::optional<TcpStream> TcpListener::accept(int timeout_ms) {
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc < 0) {
        if (errno == EINTR) return std::nullopt;
        throw_errno("poll");
    }
    if (rc == 0) return std::nullopt;
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) {
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) return std::nullopt;
        throw_errno("accept");
    }
    const int one = 1;
    ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return TcpStream(client);
}

} // namespace instat::proto
