#include "txfreq/transport.hpp"

#include <algorithm>
#include <tuple>

#include "txfreq/errors.hpp"

namespace txfreq {

double TransportConfig::latency_for(const std::string& device_id) const {
  const auto it = latency_s.find(device_id);
  return it == latency_s.end() ? 0.0 : it->second;
}

double TransportConfig::max_latency() const {
  double worst = 0.0;
  for (const auto& [id, l] : latency_s) worst = std::max(worst, l);
  return worst;
}

bool Delivery::operator>(const Delivery& other) const {
  return std::tie(at, from, seq) > std::tie(other.at, other.from, other.seq);
}

SimulatedTransport::SimulatedTransport(TransportConfig config) : config_(std::move(config)), rng_(config_.seed) {
  if (config_.jitter_s < 0.0) throw RejectedInput("jitter must be non-negative");
  for (const auto& [id, l] : config_.latency_s)
    if (l < 0.0) throw RejectedInput("latency must be non-negative");
}

void SimulatedTransport::connect(const std::string& endpoint) { endpoints_.insert(endpoint); }
void SimulatedTransport::disconnect(const std::string& endpoint) { endpoints_.erase(endpoint); }

double SimulatedTransport::draw_jitter() {
  if (config_.jitter_s == 0.0) return 0.0;
  // 53 random mantissa bits; identical on every platform for a given seed.
  const double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return (2.0 * unit - 1.0) * config_.jitter_s;
}

SendReceipt SimulatedTransport::send(const std::string& from, const std::string& to,
                                     const protocol::WireMessage& message) {
  if (!connected(from)) throw TransportError("endpoint " + from + " is not connected");
  if (!connected(to)) throw TransportError("endpoint " + to + " is not connected");
  const std::string& device_end = from == kGatewayEndpoint ? to : from;
  const Micros base = from_seconds(config_.latency_for(device_end));

  Micros deliver_at = std::max(now_, now_ + base + from_seconds(draw_jitter()));
  auto& tail = channel_tail_[{from, to}];
  deliver_at = std::max(deliver_at, tail);
  tail = deliver_at;

  queue_.push(Delivery{deliver_at, from, to, seq_++, protocol::encode(message)});
  return {now_, deliver_at, now_ + base};
}

std::vector<Delivery> SimulatedTransport::advance_clock(Micros until) {
  std::vector<Delivery> due;
  while (!queue_.empty() && queue_.top().at <= until) {
    due.push_back(queue_.top());
    queue_.pop();
  }
  now_ = std::max(now_, until);
  return due;
}

std::optional<Micros> SimulatedTransport::next_delivery_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().at;
}

}  // namespace txfreq
