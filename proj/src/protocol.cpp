#include "txfreq/protocol.hpp"

#include <array>
#include <cmath>
#include <json.hpp>

namespace txfreq::protocol {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 8> kTagNames = {
    "HELLO", "JOIN_ACK", "X_REPORT", "Z_BROADCAST", "CONVERGED", "DATA", "ALERT", "LEAVE"};

double finite(double v, const char* field) {
  if (!std::isfinite(v)) throw SerializationError(std::string("non-finite value in field ") + field);
  return v;
}

json encode_rates(const std::map<std::string, double>& z) {
  json out = json::object();
  for (const auto& [id, value] : z) out[id] = finite(value, "z");
  return out;
}

struct Encoder {
  json& j;
  void operator()(const Hello& m) const {
    j["a"] = finite(m.a, "a");
    j["gamma"] = finite(m.gamma, "gamma");
  }
  void operator()(const JoinAck& m) const {
    j["index"] = m.index;
    j["rho"] = finite(m.rho, "rho");
    j["c"] = finite(m.c, "c");
    j["d"] = finite(m.d, "d");
  }
  void operator()(const XReport& m) const { j["s"] = finite(m.s, "s"); }
  void operator()(const ZBroadcast& m) const { j["z"] = encode_rates(m.z); }
  void operator()(const Converged& m) const { j["z"] = encode_rates(m.z); }
  void operator()(const Data& m) const {
    j["seq"] = m.seq;
    j["send_ts_us"] = m.send_ts_us;
    j["size"] = finite(m.size, "size");
  }
  void operator()(const Alert& m) const {
    j["estimated_rate"] = finite(m.estimated_rate, "estimated_rate");
    j["reference_z"] = finite(m.reference_z, "reference_z");
    j["delta"] = finite(m.delta, "delta");
  }
  void operator()(const Leave&) const {}
};

const json& field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw ProtocolError(name, std::string("missing field ") + name);
  return *it;
}

double number(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number()) throw ProtocolError(name, std::string("field ") + name + " must be a number");
  return v.get<double>();
}

std::int64_t integer(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number_integer())
    throw ProtocolError(name, std::string("field ") + name + " must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t unsigned_integer(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number_unsigned())
    throw ProtocolError(name, std::string("field ") + name + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::map<std::string, double> rates(const json& j) {
  const json& v = field(j, "z");
  if (!v.is_object()) throw ProtocolError("z", "field z must be an object");
  std::map<std::string, double> out;
  for (const auto& [id, value] : v.items()) {
    if (!value.is_number()) throw ProtocolError("z", "rate for " + id + " must be a number");
    out.emplace(id, value.get<double>());
  }
  return out;
}

Payload decode_payload(Tag tag, const json& j) {
  switch (tag) {
    case Tag::hello:
      return Hello{number(j, "a"), number(j, "gamma")};
    case Tag::join_ack:
      return JoinAck{integer(j, "index"), number(j, "rho"), number(j, "c"), number(j, "d")};
    case Tag::x_report:
      return XReport{number(j, "s")};
    case Tag::z_broadcast:
      return ZBroadcast{rates(j)};
    case Tag::converged:
      return Converged{rates(j)};
    case Tag::data:
      return Data{unsigned_integer(j, "seq"), integer(j, "send_ts_us"), number(j, "size")};
    case Tag::alert:
      return Alert{number(j, "estimated_rate"), number(j, "reference_z"), number(j, "delta")};
    case Tag::leave:
      return Leave{};
  }
  throw ProtocolError("tag", "unhandled tag");
}

}  // namespace

std::string_view tag_name(Tag tag) { return kTagNames.at(static_cast<std::size_t>(tag)); }

std::vector<std::string_view> field_names(Tag tag) {
  std::vector<std::string_view> names = {"tag", "device_id", "round"};
  switch (tag) {
    case Tag::hello:
      names.insert(names.end(), {"a", "gamma"});
      break;
    case Tag::join_ack:
      names.insert(names.end(), {"index", "rho", "c", "d"});
      break;
    case Tag::x_report:
      names.push_back("s");
      break;
    case Tag::z_broadcast:
    case Tag::converged:
      names.push_back("z");
      break;
    case Tag::data:
      names.insert(names.end(), {"seq", "send_ts_us", "size"});
      break;
    case Tag::alert:
      names.insert(names.end(), {"estimated_rate", "reference_z", "delta"});
      break;
    case Tag::leave:
      break;
  }
  return names;
}

std::string encode(const WireMessage& message) {
  if (message.round < 0) throw SerializationError("round must be non-negative");
  json j = json::object();
  j["tag"] = std::string(tag_name(message.tag()));
  j["device_id"] = message.device_id;
  j["round"] = message.round;
  std::visit(Encoder{j}, message.payload);
  try {
    return j.dump() + '\n';
  } catch (const json::exception& e) {
    throw SerializationError(std::string("cannot serialize message: ") + e.what());
  }
}

WireMessage decode(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (line.find('\n') != std::string_view::npos)
    throw ProtocolError("<record>", "record spans more than one line");

  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError("<record>", std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("<record>", "record must be a JSON object");

  const json& tag_value = field(j, "tag");
  if (!tag_value.is_string()) throw ProtocolError("tag", "field tag must be a string");
  const auto tag_text = tag_value.get<std::string>();
  const auto found = std::find(kTagNames.begin(), kTagNames.end(), tag_text);
  if (found == kTagNames.end()) throw VersionError("tag", "unknown message tag " + tag_text);
  const auto tag = static_cast<Tag>(found - kTagNames.begin());

  const auto allowed = field_names(tag);
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      const std::string name = item.key().empty() ? "\"\"" : item.key();
      throw ProtocolError(name, "unexpected field " + name + " in " + tag_text);
    }
  }

  WireMessage message;
  const json& id = field(j, "device_id");
  if (!id.is_string()) throw ProtocolError("device_id", "field device_id must be a string");
  message.device_id = id.get<std::string>();
  message.round = integer(j, "round");
  if (message.round < 0) throw ProtocolError("round", "field round must be non-negative");
  message.payload = decode_payload(tag, j);
  return message;
}

}  // namespace txfreq::protocol
