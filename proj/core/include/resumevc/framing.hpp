#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace resumevc::net {

/// Largest frame accepted from a peer.
inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;

/// Owning TCP socket carrying 4-byte big-endian length-prefixed frames.
class Socket {
  public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket &&other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket &operator=(Socket &&other) noexcept;
    Socket(const Socket &) = delete;
    Socket &operator=(const Socket &) = delete;
    ~Socket() { close(); }

    bool valid() const noexcept { return fd_ >= 0; }
    int fd() const noexcept { return fd_; }

    /// Returns false if the peer is gone.
    bool send_frame(std::string_view body);
    /// nullopt on EOF, error, or an oversized frame.
    std::optional<std::string> recv_frame();

    /// Unblocks a concurrent recv_frame without releasing the descriptor.
    void shutdown() noexcept;
    void close() noexcept;

  private:
    int fd_ = -1;
};

/// Throws Error("connect-failed").
Socket connect_tcp(const std::string &host, std::uint16_t port);

class Listener {
  public:
    /// Binds 127.0.0.1 (or `host`); port 0 picks an ephemeral port.
    /// Throws Error("port-in-use") or Error("listen-failed").
    explicit Listener(std::uint16_t port, const std::string &host = "127.0.0.1");
    Listener(const Listener &) = delete;
    Listener &operator=(const Listener &) = delete;
    ~Listener() { close(); }

    std::uint16_t port() const noexcept { return port_; }
    /// nullopt once the listener is closed.
    std::optional<Socket> accept();
    void close() noexcept;

  private:
    std::atomic<int> fd_{-1};
    std::uint16_t port_ = 0;
};

/// "host:port" -> (host, port). Throws Error("bad-address").
std::pair<std::string, std::uint16_t> parse_address(std::string_view address);

} // namespace resumevc::net
