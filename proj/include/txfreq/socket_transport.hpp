#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "txfreq/transport.hpp"

namespace txfreq {

/// Owning TCP stream that exchanges newline-delimited records.
class LineSocket {
 public:
  LineSocket() = default;
  explicit LineSocket(int fd) : fd_(fd) {}
  ~LineSocket();
  LineSocket(LineSocket&& other) noexcept;
  LineSocket& operator=(LineSocket&& other) noexcept;
  LineSocket(const LineSocket&) = delete;
  LineSocket& operator=(const LineSocket&) = delete;

  static LineSocket connect(const std::string& host, int port);

  /// Blocking write of the whole record; throws TransportError on failure.
  void send_line(std::string_view line);

  /// Next complete line (without the newline), waiting up to `timeout`.
  /// nullopt on timeout; throws TransportError when the peer closed.
  std::optional<std::string> recv_line(std::chrono::milliseconds timeout);

  /// Non-blocking: a line already sitting in the read buffer.
  std::optional<std::string> buffered_line();

  /// Pulls whatever bytes are readable without blocking. Returns false on EOF.
  bool fill();

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();

 private:
  int fd_ = -1;
  std::string buffer_;
};

class LineListener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port.
  LineListener(const std::string& host, int port);
  ~LineListener();
  LineListener(const LineListener&) = delete;
  LineListener& operator=(const LineListener&) = delete;

  int port() const { return port_; }
  int fd() const { return fd_; }
  LineSocket accept();

 private:
  int fd_ = -1;
  int port_ = 0;
};

/// Transport over attached sockets, keyed by the peer's endpoint name. The
/// clock is wall time since construction.
class SocketTransport : public Transport {
 public:
  SocketTransport();

  void attach(const std::string& endpoint, std::shared_ptr<LineSocket> socket);
  void detach(const std::string& endpoint);

  SendReceipt send(const std::string& from, const std::string& to,
                   const protocol::WireMessage& message) override;
  Micros now() const override;

 private:
  std::chrono::steady_clock::time_point start_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<LineSocket>> peers_;
};

}  // namespace txfreq
