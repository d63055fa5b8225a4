#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace txfreq::protocol {

// Field names and tag spellings are frozen; see PROTOCOL.md.

enum class Tag { hello, join_ack, x_report, z_broadcast, converged, data, alert, leave };

struct Hello {
  double a = 0.0;      // data size per write
  double gamma = 0.0;  // minimum rate, Hz
  bool operator==(const Hello&) const = default;
};

struct JoinAck {
  std::int64_t index = 0;
  double rho = 1.0;
  double c = 0.0;
  double d = 0.0;
  bool operator==(const JoinAck&) const = default;
};

// Masked report s_i = x_i^{k+1} + u_i^k; the gateway never sees x_i alone.
struct XReport {
  double s = 0.0;
  bool operator==(const XReport&) const = default;
};

struct ZBroadcast {
  std::map<std::string, double> z;
  bool operator==(const ZBroadcast&) const = default;
};

struct Converged {
  std::map<std::string, double> z;
  bool operator==(const Converged&) const = default;
};

struct Data {
  std::uint64_t seq = 0;
  std::int64_t send_ts_us = 0;
  double size = 0.0;
  bool operator==(const Data&) const = default;
};

struct Alert {
  double estimated_rate = 0.0;
  double reference_z = 0.0;
  double delta = 0.0;
  bool operator==(const Alert&) const = default;
};

struct Leave {
  bool operator==(const Leave&) const = default;
};

using Payload = std::variant<Hello, JoinAck, XReport, ZBroadcast, Converged, Data, Alert, Leave>;

struct WireMessage {
  std::string device_id;
  std::int64_t round = 0;
  Payload payload;

  Tag tag() const { return static_cast<Tag>(payload.index()); }
  bool operator==(const WireMessage&) const = default;
};

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string field, const std::string& what)
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Unknown tag: the record may come from a newer protocol revision.
class VersionError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class SerializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string_view tag_name(Tag tag);

/// Every field a record of this tag carries, common fields included.
std::vector<std::string_view> field_names(Tag tag);

/// One newline-terminated JSON object per message.
std::string encode(const WireMessage& message);

/// Inverse of encode. A single trailing newline is accepted.
WireMessage decode(std::string_view line);

}  // namespace txfreq::protocol
