#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace txfreq {

// Logical and wall timestamps are carried as integral microseconds.
using Micros = std::chrono::microseconds;

inline double to_seconds(Micros t) { return static_cast<double>(t.count()) * 1e-6; }

inline Micros from_seconds(double seconds) {
  return Micros{static_cast<std::int64_t>(std::llround(seconds * 1e6))};
}

// Send period for a rate in Hz, rounded to the microsecond grid.
inline Micros period_for_rate(double rate_hz) { return from_seconds(1.0 / rate_hz); }

}  // namespace txfreq
