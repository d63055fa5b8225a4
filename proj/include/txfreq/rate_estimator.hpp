#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "txfreq/time.hpp"

namespace txfreq {

struct RateEstimate {
  std::string device_id;
  double estimated_rate = 0.0;  // Hz
  std::size_t sample_count = 0;
  std::size_t window = 0;
};

/// (n - 1) / (t_last - t_first) over the most recent min(n, window) arrivals.
/// nullopt when fewer than two arrivals (or a zero span) are available.
std::optional<RateEstimate> estimate_rate(std::span<const Micros> arrivals, std::size_t window = 300);

/// Fixed-capacity ring of arrival timestamps, oldest first.
class ArrivalWindow {
 public:
  explicit ArrivalWindow(std::size_t capacity = 300);

  /// Throws RejectedInput if `arrival` precedes the latest stored timestamp.
  void push(Micros arrival);
  void clear();

  std::size_t size() const { return count_; }
  std::size_t capacity() const { return slots_.size(); }
  std::vector<Micros> snapshot() const;
  std::optional<RateEstimate> estimate() const;

 private:
  std::vector<Micros> slots_;
  std::size_t head_ = 0;  // index of the oldest element
  std::size_t count_ = 0;
};

struct AnomalyEvent {
  std::string device_id;
  double estimated_rate = 0.0;
  double reference_z = 0.0;
  double delta = 0.0;
  Micros detected_at{0};

  double deviation() const { return estimated_rate - reference_z; }
};

/// Event iff |estimate - z_i| >= delta, once at least min_samples arrivals back
/// the estimate.
std::optional<AnomalyEvent> detect_anomaly(const RateEstimate& estimate, double z_i, double delta,
                                           std::size_t min_samples = 30, Micros now = Micros{0});

/// max(0.1 Hz, 3 z^2 L): three times the rate decay a blocking send of
/// latency L (seconds) causes at rate z.
double auto_delta(double z_i, double latency_bound_s);

}  // namespace txfreq
