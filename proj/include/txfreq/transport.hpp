#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "txfreq/protocol.hpp"
#include "txfreq/time.hpp"

namespace txfreq {

inline constexpr const char* kGatewayEndpoint = "gateway";

struct TransportConfig {
  enum class Mode { simulated, socket };
  Mode mode = Mode::simulated;
  std::map<std::string, double> latency_s;  // per-device one-way latency
  double jitter_s = 0.0;                    // uniform half-width
  std::uint64_t seed = 42;
  std::string host = "127.0.0.1";
  int port = 0;

  double latency_for(const std::string& device_id) const;
  double max_latency() const;
};

struct SendReceipt {
  Micros sent_at{0};
  Micros deliver_at{0};
  Micros sender_free_at{0};  // when the sender's context may run again
};

struct Delivery {
  Micros at{0};
  std::string from;
  std::string to;
  std::uint64_t seq = 0;
  std::string line;  // encoded record

  bool operator>(const Delivery& other) const;
};

/// Message passing with a clock, shared by the simulated and socket modes.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual SendReceipt send(const std::string& from, const std::string& to,
                           const protocol::WireMessage& message) = 0;
  virtual Micros now() const = 0;
};

/// Deterministic in-process network on a logical clock.
///
/// The latency of a channel is that of its device end. A send blocks the
/// sender for the base latency and delivers after base latency plus a seeded
/// jitter draw, never overtaking an earlier message on the same channel.
/// Deliveries are ordered by (time, sender, sequence).
class SimulatedTransport : public Transport {
 public:
  explicit SimulatedTransport(TransportConfig config);

  void connect(const std::string& endpoint);
  void disconnect(const std::string& endpoint);
  bool connected(const std::string& endpoint) const { return endpoints_.count(endpoint) != 0; }

  /// Throws TransportError if either end is not connected.
  SendReceipt send(const std::string& from, const std::string& to,
                   const protocol::WireMessage& message) override;

  /// Pops every delivery due at or before `until` and moves the clock there.
  std::vector<Delivery> advance_clock(Micros until);

  std::optional<Micros> next_delivery_time() const;
  Micros now() const override { return now_; }

 private:
  double draw_jitter();

  TransportConfig config_;
  std::set<std::string> endpoints_;
  std::priority_queue<Delivery, std::vector<Delivery>, std::greater<>> queue_;
  std::map<std::pair<std::string, std::string>, Micros> channel_tail_;
  std::mt19937_64 rng_;
  Micros now_{0};
  std::uint64_t seq_ = 0;
};

}  // namespace txfreq
