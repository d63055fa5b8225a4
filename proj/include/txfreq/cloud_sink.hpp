#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "txfreq/time.hpp"

namespace txfreq {

struct SinkQuota {
  double max_writes_per_sec = 10.0;
  double max_storage = 1e9;  // size units
};

struct SinkRecord {
  std::string device_id;
  std::uint64_t seq = 0;
  Micros send_ts{0};
  Micros arrival{0};
  double size = 0.0;
  bool operator==(const SinkRecord&) const = default;
};

enum class WriteResult { accepted, congestion, storage_full };

std::string_view write_result_name(WriteResult result);

/// Append-only store with a writes-per-second quota over a trailing 1 s
/// window and a storage cap. Calls must arrive in non-decreasing arrival order.
class CloudSink {
 public:
  explicit CloudSink(SinkQuota quota = {}, std::optional<std::filesystem::path> log_path = {});

  WriteResult write(const SinkRecord& record);

  /// Accepted records with from <= arrival < to, in arrival order.
  std::vector<SinkRecord> dump(Micros from, Micros to) const;
  const std::vector<SinkRecord>& dump() const { return records_; }

  const SinkQuota& quota() const { return quota_; }
  double used_storage() const { return used_storage_; }
  std::size_t congestion_errors() const { return congestion_; }
  std::size_t storage_errors() const { return storage_full_; }
  const std::map<std::string, std::size_t>& congestion_by_device() const { return congestion_by_device_; }

  static std::string header();
  static std::vector<SinkRecord> read_log(const std::filesystem::path& path);

 private:
  SinkQuota quota_;
  std::vector<SinkRecord> records_;
  std::deque<Micros> recent_;
  double used_storage_ = 0.0;
  std::size_t congestion_ = 0;
  std::size_t storage_full_ = 0;
  std::map<std::string, std::size_t> congestion_by_device_;
  std::optional<std::ofstream> log_;
};

}  // namespace txfreq
