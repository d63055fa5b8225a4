#include "txfreq/socket_transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "txfreq/errors.hpp"

namespace txfreq {
namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

sockaddr_in make_address(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw TransportError("invalid IPv4 address " + host);
  return addr;
}

}  // namespace

LineSocket::~LineSocket() { close(); }

LineSocket::LineSocket(LineSocket&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), buffer_(std::move(other.buffer_)) {}

LineSocket& LineSocket::operator=(LineSocket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
    buffer_ = std::move(other.buffer_);
  }
  return *this;
}

void LineSocket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

LineSocket LineSocket::connect(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(errno_text("socket"));
  LineSocket sock(fd);
  const auto addr = make_address(host, port);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    throw TransportError(errno_text("connect"));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return sock;
}

void LineSocket::send_line(std::string_view line) {
  if (fd_ < 0) throw TransportError("send on closed socket");
  std::string record(line);
  if (record.empty() || record.back() != '\n') record.push_back('\n');
  std::size_t sent = 0;
  while (sent < record.size()) {
    const ssize_t n = ::send(fd_, record.data() + sent, record.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineSocket::buffered_line() {
  const auto pos = buffer_.find('\n');
  if (pos == std::string::npos) return std::nullopt;
  std::string line = buffer_.substr(0, pos);
  buffer_.erase(0, pos + 1);
  return line;
}

bool LineSocket::fill() {
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, MSG_DONTWAIT);
    if (n > 0) {
      buffer_.append(chunk, static_cast<std::size_t>(n));
      continue;
    }
    if (n == 0) return false;
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) return true;
    throw TransportError(errno_text("recv"));
  }
}

std::optional<std::string> LineSocket::recv_line(std::chrono::milliseconds timeout) {
  if (auto line = buffered_line()) return line;
  if (fd_ < 0) throw TransportError("receive on closed socket");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(std::max<std::int64_t>(0, left.count())));
    if (ready < 0 && errno != EINTR) throw TransportError(errno_text("poll"));
    if (ready > 0) {
      const bool open = fill();
      if (auto line = buffered_line()) return line;
      if (!open) throw TransportError("peer closed the connection");
    }
    if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
  }
}

LineListener::LineListener(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  auto addr = make_address(host, port);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const auto msg = errno_text("bind");
    ::close(fd_);
    throw TransportError(msg);
  }
  if (::listen(fd_, 64) != 0) {
    const auto msg = errno_text("listen");
    ::close(fd_);
    throw TransportError(msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

LineListener::~LineListener() {
  if (fd_ >= 0) ::close(fd_);
}

LineSocket LineListener::accept() {
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw TransportError(errno_text("accept"));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return LineSocket(fd);
}

SocketTransport::SocketTransport() : start_(std::chrono::steady_clock::now()) {}

void SocketTransport::attach(const std::string& endpoint, std::shared_ptr<LineSocket> socket) {
  std::lock_guard lock(mutex_);
  peers_[endpoint] = std::move(socket);
}

void SocketTransport::detach(const std::string& endpoint) {
  std::lock_guard lock(mutex_);
  peers_.erase(endpoint);
}

Micros SocketTransport::now() const {
  return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now() - start_);
}

SendReceipt SocketTransport::send(const std::string&, const std::string& to,
                                  const protocol::WireMessage& message) {
  std::shared_ptr<LineSocket> peer;
  {
    std::lock_guard lock(mutex_);
    const auto it = peers_.find(to);
    if (it == peers_.end()) throw TransportError("endpoint " + to + " is not connected");
    peer = it->second;
  }
  const Micros sent_at = now();
  peer->send_line(protocol::encode(message));
  const Micros done = now();
  return {sent_at, done, done};
}

}  // namespace txfreq
