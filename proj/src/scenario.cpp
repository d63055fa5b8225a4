#include "txfreq/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "txfreq/errors.hpp"

namespace txfreq {
namespace {

using nlohmann::json;

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; }))
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

double number(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + "." + key + " is required");
  if (!it->is_number()) throw ConfigError(where + "." + key + " must be a number");
  return it->get<double>();
}

double number_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j, key, where) : fallback;
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  const auto it = j.find(key);
  return it == j.end() ? empty : *it;
}

DeviceConfig parse_device(const json& j, std::size_t index) {
  const std::string where = "devices[" + std::to_string(index) + "]";
  only_keys(j, where, {"id", "a", "gamma", "utility", "domain_max", "join_time_s", "leave_time_s", "manipulation"});
  DeviceConfig dev;
  if (!j.contains("id") || !j["id"].is_string()) throw ConfigError(where + ".id must be a string");
  dev.id = j["id"].get<std::string>();
  if (dev.id.empty() || dev.id == kGatewayEndpoint) throw ConfigError(where + ".id is reserved or empty");
  dev.a = number(j, "a", where);
  dev.gamma = number(j, "gamma", where);
  if (!j.contains("utility") || !j["utility"].is_array() || j["utility"].empty())
    throw ConfigError(where + ".utility must be a non-empty array of coefficients");
  for (const auto& c : j["utility"]) {
    if (!c.is_number()) throw ConfigError(where + ".utility must contain numbers");
    dev.utility.push_back(c.get<double>());
  }
  if (j.contains("domain_max")) dev.domain_max = number(j, "domain_max", where);
  dev.join_time_s = number_or(j, "join_time_s", 0.0, where);
  if (dev.join_time_s < 0.0) throw ConfigError(where + ".join_time_s must be non-negative");
  if (j.contains("leave_time_s")) {
    dev.leave_time_s = number(j, "leave_time_s", where);
    if (*dev.leave_time_s <= dev.join_time_s) throw ConfigError(where + ".leave_time_s must follow join_time_s");
  }
  if (j.contains("manipulation")) {
    const json& m = j["manipulation"];
    only_keys(m, where + ".manipulation", {"override_rate", "at_time_s"});
    dev.manipulation = ManipulationConfig{number(m, "override_rate", where + ".manipulation"),
                                          number(m, "at_time_s", where + ".manipulation")};
    if (!(dev.manipulation->override_rate > 0.0))
      throw ConfigError(where + ".manipulation.override_rate must be positive");
  }
  return dev;
}

}  // namespace

const DeviceConfig& ScenarioConfig::device(const std::string& id) const {
  const auto it = std::find_if(devices.begin(), devices.end(), [&](const DeviceConfig& d) { return d.id == id; });
  if (it == devices.end()) throw ConfigError("unknown device " + id);
  return *it;
}

double ScenarioConfig::domain_max_for(const DeviceConfig& dev) const {
  if (dev.domain_max) return *dev.domain_max;
  std::vector<double> sizes;
  for (const auto& d : devices) sizes.push_back(d.a);
  return default_domain_max(gateway.c, gateway.d, sizes);
}

UtilityFunction ScenarioConfig::utility_for(const DeviceConfig& dev) const {
  return UtilityFunction(dev.utility, domain_max_for(dev));
}

DeviceSpec ScenarioConfig::spec_for(const DeviceConfig& dev) const {
  return DeviceSpec{dev.id, dev.a, dev.gamma, utility_for(dev)};
}

ScenarioConfig parse_scenario(const json& doc) {
  only_keys(doc, "scenario", {"name", "duration_s", "gateway", "transport", "devices", "output_dir", "reference_utility"});
  ScenarioConfig cfg;
  if (doc.contains("name")) cfg.name = doc["name"].get<std::string>();
  cfg.duration_s = number_or(doc, "duration_s", cfg.duration_s, "scenario");
  if (!(cfg.duration_s > 0.0)) throw ConfigError("duration_s must be positive");
  if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();

  const json& ref = section(doc, "reference_utility");
  only_keys(ref, "reference_utility", {"admm", "average", "proportional"});
  if (ref.contains("admm")) cfg.reference_utility.admm = number(ref, "admm", "reference_utility");
  if (ref.contains("average")) cfg.reference_utility.average = number(ref, "average", "reference_utility");
  if (ref.contains("proportional"))
    cfg.reference_utility.proportional = number(ref, "proportional", "reference_utility");

  const json& gw = section(doc, "gateway");
  only_keys(gw, "gateway", {"budget", "rho", "tolerances", "anomaly", "sink"});
  const json& budget = section(gw, "budget");
  only_keys(budget, "gateway.budget", {"c", "d"});
  cfg.gateway.c = number(budget, "c", "gateway.budget");
  cfg.gateway.d = number(budget, "d", "gateway.budget");
  cfg.gateway.rho = number_or(gw, "rho", 1.0, "gateway");
  const json& tolerances = section(gw, "tolerances");
  only_keys(tolerances, "gateway.tolerances", {"tol", "max_iter"});
  cfg.gateway.tol = number_or(tolerances, "tol", 1e-4, "gateway.tolerances");
  cfg.gateway.max_rounds = static_cast<int>(number_or(tolerances, "max_iter", 1000, "gateway.tolerances"));

  const json& anomaly = section(gw, "anomaly");
  only_keys(anomaly, "gateway.anomaly", {"delta", "window", "min_samples", "latency_bound_s", "auto_remediate"});
  if (anomaly.contains("delta")) {
    const json& delta = anomaly["delta"];
    if (delta.is_string()) {
      if (delta.get<std::string>() != "auto") throw ConfigError("gateway.anomaly.delta must be a number or \"auto\"");
    } else {
      cfg.gateway.delta = number(anomaly, "delta", "gateway.anomaly");
    }
  }
  cfg.gateway.window = static_cast<std::size_t>(number_or(anomaly, "window", 300, "gateway.anomaly"));
  cfg.gateway.min_samples = static_cast<std::size_t>(number_or(anomaly, "min_samples", 30, "gateway.anomaly"));
  cfg.gateway.latency_bound_s = number_or(anomaly, "latency_bound_s", 0.005, "gateway.anomaly");
  if (anomaly.contains("auto_remediate")) cfg.gateway.auto_remediate = anomaly["auto_remediate"].get<bool>();

  const json& sink = section(gw, "sink");
  only_keys(sink, "gateway.sink", {"max_writes_per_sec", "max_storage"});
  cfg.gateway.sink.max_writes_per_sec = number_or(sink, "max_writes_per_sec", 10.0, "gateway.sink");
  cfg.gateway.sink.max_storage = number_or(sink, "max_storage", 1e9, "gateway.sink");

  const json& tr = section(doc, "transport");
  only_keys(tr, "transport", {"mode", "seed", "jitter_s", "latency_s", "host", "port"});
  if (tr.contains("mode")) {
    const auto mode = tr["mode"].get<std::string>();
    if (mode == "simulated")
      cfg.transport.mode = TransportConfig::Mode::simulated;
    else if (mode == "socket")
      cfg.transport.mode = TransportConfig::Mode::socket;
    else
      throw ConfigError("transport.mode must be simulated or socket");
  }
  if (tr.contains("seed")) cfg.transport.seed = tr["seed"].get<std::uint64_t>();
  cfg.transport.jitter_s = number_or(tr, "jitter_s", 0.0, "transport");
  if (tr.contains("latency_s")) {
    for (const auto& [id, v] : tr["latency_s"].items()) {
      if (!v.is_number() || v.get<double>() < 0.0) throw ConfigError("transport.latency_s." + id + " must be >= 0");
      cfg.transport.latency_s[id] = v.get<double>();
    }
  }
  if (tr.contains("host")) cfg.transport.host = tr["host"].get<std::string>();
  if (tr.contains("port")) cfg.transport.port = tr["port"].get<int>();
  if (cfg.transport.jitter_s < 0.0) throw ConfigError("transport.jitter_s must be non-negative");
  cfg.gateway.barrier_deadline = std::max(Micros{1'000'000}, from_seconds(10.0 * cfg.transport.max_latency()));

  if (!doc.contains("devices") || !doc["devices"].is_array() || doc["devices"].empty())
    throw ConfigError("at least one device is required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc["devices"].size(); ++i) {
    auto dev = parse_device(doc["devices"][i], i);
    if (!ids.insert(dev.id).second) throw ConfigError("duplicate device id " + dev.id);
    cfg.devices.push_back(std::move(dev));
  }
  for (const auto& [id, l] : cfg.transport.latency_s)
    if (ids.count(id) == 0) throw ConfigError("transport.latency_s names unknown device " + id);

  try {
    for (const auto& dev : cfg.devices) {
      const auto report = validate_concavity(cfg.utility_for(dev));
      if (!report.ok)
        throw ConfigError("utility of " + dev.id + " is not strictly concave at x=" +
                          std::to_string(*report.first_violation));
    }
  } catch (const RejectedInput& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  try {
    return parse_scenario(doc);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace txfreq
