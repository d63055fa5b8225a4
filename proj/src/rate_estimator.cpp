#include "txfreq/rate_estimator.hpp"

#include <algorithm>
#include <cmath>

#include "txfreq/errors.hpp"

namespace txfreq {

std::optional<RateEstimate> estimate_rate(std::span<const Micros> arrivals, std::size_t window) {
  if (window < 2) throw RejectedInput("estimation window must hold at least two arrivals");
  const std::size_t used = std::min(arrivals.size(), window);
  if (used < 2) return std::nullopt;
  const auto recent = arrivals.last(used);
  const Micros span = recent.back() - recent.front();
  if (span.count() <= 0) return std::nullopt;
  RateEstimate est;
  est.estimated_rate = static_cast<double>(used - 1) / to_seconds(span);
  est.sample_count = used;
  est.window = window;
  return est;
}

ArrivalWindow::ArrivalWindow(std::size_t capacity) : slots_(capacity) {
  if (capacity < 2) throw RejectedInput("arrival window capacity must be at least two");
}

void ArrivalWindow::push(Micros arrival) {
  if (count_ > 0 && arrival < slots_[(head_ + count_ - 1) % slots_.size()])
    throw RejectedInput("arrival timestamps must be non-decreasing");
  if (count_ < slots_.size()) {
    slots_[(head_ + count_) % slots_.size()] = arrival;
    ++count_;
  } else {
    slots_[head_] = arrival;
    head_ = (head_ + 1) % slots_.size();
  }
}

void ArrivalWindow::clear() {
  head_ = 0;
  count_ = 0;
}

std::vector<Micros> ArrivalWindow::snapshot() const {
  std::vector<Micros> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) out.push_back(slots_[(head_ + i) % slots_.size()]);
  return out;
}

std::optional<RateEstimate> ArrivalWindow::estimate() const {
  if (count_ < 2) return std::nullopt;
  const Micros first = slots_[head_];
  const Micros last = slots_[(head_ + count_ - 1) % slots_.size()];
  if ((last - first).count() <= 0) return std::nullopt;
  RateEstimate est;
  est.estimated_rate = static_cast<double>(count_ - 1) / to_seconds(last - first);
  est.sample_count = count_;
  est.window = slots_.size();
  return est;
}

std::optional<AnomalyEvent> detect_anomaly(const RateEstimate& estimate, double z_i, double delta,
                                           std::size_t min_samples, Micros now) {
  if (!(delta > 0.0)) throw RejectedInput("anomaly threshold must be positive");
  if (estimate.sample_count < min_samples) return std::nullopt;
  if (std::abs(estimate.estimated_rate - z_i) < delta) return std::nullopt;
  return AnomalyEvent{estimate.device_id, estimate.estimated_rate, z_i, delta, now};
}

double auto_delta(double z_i, double latency_bound_s) {
  return std::max(0.1, 3.0 * z_i * latency_bound_s * z_i);
}

}  // namespace txfreq
