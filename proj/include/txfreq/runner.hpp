#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "txfreq/admm.hpp"
#include "txfreq/gateway.hpp"
#include "txfreq/scenario.hpp"

namespace txfreq {

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;  // overrides the config
  std::optional<std::uint64_t> seed;                // overrides the config
  bool write_artifacts = true;
};

struct UsageSample {
  double t_s = 0.0;
  ResourceUsage usage;
};

struct DeviceSummary {
  std::string device_id;
  double theoretical = 0.0;
  std::optional<double> estimated;
  std::optional<double> abs_error;
};

struct UtilitySummary {
  double admm = 0.0;
  double average = 0.0;
  double proportional = 0.0;
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string error;
  std::vector<std::string> event_log;  // one JSON object per line
  std::vector<std::string> wire_log;   // "<deliver_us> <from> <to> <record>"
  std::vector<TraceRow> trace;
  std::vector<PacketRecord> packets;
  std::vector<UsageSample> usage;
  std::vector<AnomalyEvent> anomalies;
  std::map<std::string, Micros> manipulation_started;
  std::vector<DeviceSummary> summary;
  std::optional<UtilitySummary> utility;
  ResourceUsage final_usage;
  std::size_t sink_records = 0;
  std::size_t sink_congestion_errors = 0;
  nlohmann::ordered_json gateway_state;
};

/// Centralized solve over the chosen devices plus the two reference
/// allocations, for the `solve` command and for run summaries.
struct SolveReport {
  std::vector<std::string> device_ids;
  SolveResult result;
  double admm_utility = 0.0;
  double average_utility = 0.0;
  double proportional_utility = 0.0;
};

/// Throws InfeasibleConstraints for an empty constraint set.
SolveReport solve_scenario(const ScenarioConfig& config, const std::vector<std::string>& device_ids);
SolveReport solve_scenario(const ScenarioConfig& config);

/// Runs the scenario in the configured transport mode and, unless disabled,
/// writes the artifact files into the output directory.
RunOutcome run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

RunOutcome run_simulated(const ScenarioConfig& config, const RunOptions& options = {});
RunOutcome run_socket(const ScenarioConfig& config, const RunOptions& options = {});

namespace detail {

/// Fills summary/utility/state fields from the finished gateway.
void finalize_outcome(const ScenarioConfig& config, Gateway& gateway, RunOutcome& outcome);

/// Writes every artifact file. Throws std::ios_base::failure on I/O errors.
void write_artifacts(const ScenarioConfig& config, const std::filesystem::path& dir, const RunOutcome& outcome);

std::string format_event(const GatewayEvent& event);

}  // namespace detail
}  // namespace txfreq
