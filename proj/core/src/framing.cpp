#include "resumevc/framing.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>

#include "resumevc/error.hpp"

namespace resumevc::net {

namespace {

bool write_all(int fd, const char *data, std::size_t len) {
    while (len > 0) {
        const auto n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            return false;
        }
        data += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

bool read_all(int fd, char *data, std::size_t len) {
    while (len > 0) {
        const auto n = ::recv(fd, data, len, 0);
        if (n == 0) {
            return false;
        }
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            return false;
        }
        data += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

} // namespace

Socket &Socket::operator=(Socket &&other) noexcept {
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

bool Socket::send_frame(std::string_view body) {
    if (fd_ < 0 || body.size() > kMaxFrameBytes) {
        return false;
    }
    const std::uint32_t len = htonl(static_cast<std::uint32_t>(body.size()));
    std::string buf(reinterpret_cast<const char *>(&len), 4);
    buf.append(body);
    return write_all(fd_, buf.data(), buf.size());
}

std::optional<std::string> Socket::recv_frame() {
    if (fd_ < 0) {
        return std::nullopt;
    }
    std::uint32_t len_be = 0;
    if (!read_all(fd_, reinterpret_cast<char *>(&len_be), 4)) {
        return std::nullopt;
    }
    const auto len = ntohl(len_be);
    if (len > kMaxFrameBytes) {
        return std::nullopt;
    }
    std::string body(len, '\0');
    if (len > 0 && !read_all(fd_, body.data(), len)) {
        return std::nullopt;
    }
    return body;
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
    }
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

Socket connect_tcp(const std::string &host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo *res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr) {
        throw Error("connect-failed", "cannot resolve " + host);
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        throw Error("connect-failed", std::strerror(errno));
    }
    Socket sock(fd);
    const int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0) {
        throw Error("connect-failed", host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return sock;
}

Listener::Listener(std::uint16_t port, const std::string &host) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) {
        throw Error("listen-failed", std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd_.load(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        close();
        throw Error("listen-failed", "bad bind address " + host);
    }
    if (::bind(fd_.load(), reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0) {
        const int err = errno;
        close();
        throw Error(err == EADDRINUSE ? "port-in-use" : "listen-failed", std::strerror(err));
    }
    if (::listen(fd_.load(), 64) != 0) {
        const int err = errno;
        close();
        throw Error("listen-failed", std::strerror(err));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd_.load(), reinterpret_cast<sockaddr *>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

std::optional<Socket> Listener::accept() {
    for (;;) {
        const int listen_fd = fd_.load();
        if (listen_fd < 0) {
            return std::nullopt;
        }
        const int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd >= 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            return Socket(fd);
        }
        if (errno == EINTR || errno == ECONNABORTED) {
            continue;
        }
        return std::nullopt;
    }
}

void Listener::close() noexcept {
    const int fd = fd_.exchange(-1);
    if (fd >= 0) {
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
    }
}

std::pair<std::string, std::uint16_t> parse_address(std::string_view address) {
    const auto colon = address.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw Error("bad-address", "expected host:port, got '" + std::string(address) + "'");
    }
    unsigned port = 0;
    const auto port_text = address.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) {
        throw Error("bad-address", "bad port in '" + std::string(address) + "'");
    }
    return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

} // namespace resumevc::net
