#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "txfreq/device_agent.hpp"
#include "txfreq/gateway.hpp"
#include "txfreq/transport.hpp"
#include "txfreq/utility.hpp"

namespace txfreq {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInfeasible = 2, kExitNonConvergence = 3, kExitIo = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManipulationConfig {
  double override_rate = 0.0;  // Hz
  double at_time_s = 0.0;
};

/// Agent-side section: the only place utility coefficients appear.
struct DeviceConfig {
  std::string id;
  double a = 1.0;
  double gamma = 0.0;
  std::vector<double> utility;  // constant term first
  std::optional<double> domain_max;
  double join_time_s = 0.0;
  std::optional<double> leave_time_s;
  std::optional<ManipulationConfig> manipulation;
};

/// Externally reported utilities to print next to the computed ones.
struct ReferenceUtilities {
  std::optional<double> admm;
  std::optional<double> average;
  std::optional<double> proportional;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double duration_s = 300.0;
  GatewayConfig gateway;
  TransportConfig transport;
  std::vector<DeviceConfig> devices;
  std::filesystem::path output_dir = "out";
  ReferenceUtilities reference_utility;

  const DeviceConfig& device(const std::string& id) const;
  /// domain_max if given, else max(c, d / min a) + 1 over all configured devices.
  double domain_max_for(const DeviceConfig& device) const;
  UtilityFunction utility_for(const DeviceConfig& device) const;
  DeviceSpec spec_for(const DeviceConfig& device) const;
};

/// Throws ConfigError on schema or value problems (including non-concave
/// utilities and unknown keys).
ScenarioConfig parse_scenario(const nlohmann::json& document);

/// Throws std::ios_base::failure when the file cannot be read and ConfigError
/// when its contents are invalid.
ScenarioConfig load_scenario(const std::filesystem::path& path);

}  // namespace txfreq
