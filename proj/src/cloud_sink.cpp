#include "txfreq/cloud_sink.hpp"

#include <algorithm>
#include <sstream>

#include "txfreq/errors.hpp"

namespace txfreq {

std::string_view write_result_name(WriteResult result) {
  switch (result) {
    case WriteResult::accepted:
      return "accepted";
    case WriteResult::congestion:
      return "congestion";
    case WriteResult::storage_full:
      return "storage_full";
  }
  return "?";
}

CloudSink::CloudSink(SinkQuota quota, std::optional<std::filesystem::path> log_path) : quota_(quota) {
  if (!(quota_.max_writes_per_sec > 0.0)) throw RejectedInput("write quota must be positive");
  if (!(quota_.max_storage > 0.0)) throw RejectedInput("storage cap must be positive");
  if (log_path) {
    log_.emplace(*log_path, std::ios::out | std::ios::trunc);
    if (!*log_) throw std::ios_base::failure("cannot open sink log " + log_path->string());
    *log_ << header() << '\n';
  }
}

std::string CloudSink::header() { return "device_id,seq,send_ts_us,arrival_us,size"; }

WriteResult CloudSink::write(const SinkRecord& record) {
  if (!recent_.empty() && record.arrival < recent_.back())
    throw RejectedInput("sink writes must arrive in time order");
  const Micros window_start = record.arrival - Micros{1'000'000};
  while (!recent_.empty() && recent_.front() <= window_start) recent_.pop_front();

  if (static_cast<double>(recent_.size()) >= quota_.max_writes_per_sec) {
    ++congestion_;
    ++congestion_by_device_[record.device_id];
    return WriteResult::congestion;
  }
  if (used_storage_ + record.size > quota_.max_storage) {
    ++storage_full_;
    return WriteResult::storage_full;
  }
  recent_.push_back(record.arrival);
  used_storage_ += record.size;
  records_.push_back(record);
  if (log_) {
    *log_ << record.device_id << ',' << record.seq << ',' << record.send_ts.count() << ','
          << record.arrival.count() << ',' << record.size << '\n';
  }
  return WriteResult::accepted;
}

std::vector<SinkRecord> CloudSink::dump(Micros from, Micros to) const {
  std::vector<SinkRecord> out;
  std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
               [&](const SinkRecord& r) { return r.arrival >= from && r.arrival < to; });
  return out;
}

std::vector<SinkRecord> CloudSink::read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open sink log " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != header()) throw std::ios_base::failure("unexpected sink log header in " + path.string());
  std::vector<SinkRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    SinkRecord r;
    std::string cell;
    std::getline(fields, r.device_id, ',');
    std::getline(fields, cell, ',');
    r.seq = std::stoull(cell);
    std::getline(fields, cell, ',');
    r.send_ts = Micros{std::stoll(cell)};
    std::getline(fields, cell, ',');
    r.arrival = Micros{std::stoll(cell)};
    std::getline(fields, cell, ',');
    r.size = std::stod(cell);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace txfreq
