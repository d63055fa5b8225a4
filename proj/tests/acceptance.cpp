// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracle/oracle.hpp"
#include "support/generators.hpp"
#include "txfreq/admm.hpp"
#include "txfreq/projection.hpp"
#include "txfreq/report.hpp"
#include "txfreq/runner.hpp"

using namespace txfreq;
using namespace txfreq::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

ScenarioConfig scenario(const char* name) { return load_scenario(fs::path(SCENARIO_DIR) / name); }

struct TimedRun {
  RunOutcome outcome;
  double seconds = 0.0;
};

TimedRun timed_run(const ScenarioConfig& cfg, RunOptions options = {.write_artifacts = false}) {
  const auto start = std::chrono::steady_clock::now();
  TimedRun run{run_scenario(cfg, options)};
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

const DeviceSummary& row(const RunOutcome& outcome, const std::string& id) {
  for (const auto& r : outcome.summary)
    if (r.device_id == id) return r;
  throw std::runtime_error("no summary row for " + id);
}

double estimate_of(const RunOutcome& outcome, const std::string& id) {
  const auto& r = row(outcome, id);
  return r.estimated ? *r.estimated : std::nan("");
}

UtilityFunction table_utility(const ScenarioConfig& cfg, const std::string& id) {
  return cfg.utility_for(cfg.device(id));
}

Verdict scenario_a_optimum() {
  Verdict v;
  const auto cfg = scenario("scenario_a.cfg");
  const std::vector<UtilityFunction> fs{table_utility(cfg, "dev1"), table_utility(cfg, "dev2")};
  const ConstraintSet set(10.0, 15.0, {2.0, 3.0}, {1.0, 1.0});
  const auto result = solve_centralized(fs, set, {.rho = 1.0});
  const auto& last = result.trace.back();
  v.detail << "x* = (" << result.x_star[0] << ", " << result.x_star[1] << "), residuals " << last.primal_residual
           << " / " << last.dual_residual;
  v.require(result.converged(), "converged");
  v.require(std::max(last.primal_residual, last.dual_residual) < 1e-4, "residual < 1e-4");
  v.require(std::abs(result.x_star[0] - 1.0) <= 1e-3 && std::abs(result.x_star[1] - 4.0) <= 1e-3,
            "x* within 1e-3 of (1, 4)");
  return v;
}

Verdict scenario_b_optimum() {
  Verdict v;
  const auto cfg = scenario("scenario_b.cfg");
  const auto report = solve_scenario(cfg);
  const auto& x = report.result.x_star;
  v.detail << "x* = (" << x[0] << ", " << x[1] << ", " << x[2] << "), utility " << report.admm_utility;
  v.require(report.result.converged(), "converged");
  const std::vector<double> expected{1.0, 8.0 / 3.0, 1.0};
  v.require(max_abs_diff(x, expected) <= 1e-3, "x* within 1e-3 of (1, 2.6667, 1)");
  v.require(std::abs(report.admm_utility - 1381.22) <= 0.01, "utility within 0.01 of 1381.22");
  return v;
}

Verdict baselines() {
  Verdict v;
  const auto cfg = scenario("scenario_b.cfg");
  const auto report = solve_scenario(cfg);
  v.detail << "proportional " << report.proportional_utility << ", average " << report.average_utility;
  v.require(std::abs(report.proportional_utility - 1086.00) <= 0.01, "proportional within 0.01 of 1086.00");

  // Independent average: every device at c/3, summed straight from the coefficients.
  double average = 0.0;
  for (const auto& dev : cfg.devices) {
    double term = 0.0, power = 1.0;
    for (double coeff : dev.utility) {
      term += coeff * power;
      power *= 10.0 / 3.0;
    }
    average += term;
  }
  v.require(std::abs(report.average_utility - average) <= 0.01, "average matches the independent sum");
  v.require(std::abs(report.average_utility - 1189.93) <= 0.01, "average within 0.01 of 1189.93");

  const auto dir = fs::temp_directory_path() / "txfreq_acceptance_report";
  fs::remove_all(dir);
  run_scenario(cfg, {.output_dir = dir});
  std::ostringstream printed;
  const int code = write_report(dir, printed);
  const auto text = printed.str();
  v.require(code == kExitOk, "report succeeds");
  v.require(text.find("1190.35") != std::string::npos && text.find("0.424") != std::string::npos,
            "report shows 1190.35 and the 0.424 gap");
  v.detail << ", report gap line present: " << (text.find("0.424") != std::string::npos ? "yes" : "no");
  return v;
}

Verdict rate_fidelity() {
  Verdict v;
  const auto run = timed_run(scenario("scenario_a.cfg"));
  const double e1 = estimate_of(run.outcome, "dev1"), e2 = estimate_of(run.outcome, "dev2");
  v.detail << std::setprecision(6) << "estimates " << e1 << " / " << e2 << " Hz, " << run.seconds << " s";
  v.require(run.outcome.exit_code == kExitOk, "run exit code 0");
  v.require(std::abs(e1 - 0.9984) <= 0.001, "dev1 within 0.001 of 0.9984");
  v.require(std::abs(e2 - 3.932) <= 0.01, "dev2 within 0.01 of 3.932");
  v.require(run.seconds < 10.0, "run < 10 s");
  return v;
}

Verdict dynamic_join() {
  Verdict v;
  const auto cfg = scenario("scenario_b.cfg");
  const auto run = timed_run(cfg);
  const Micros join = from_seconds(cfg.device("dev3").join_time_s);
  std::optional<double> before;
  double worst_shift = 0.0;
  for (const auto& p : run.outcome.packets) {
    if (p.device_id != "dev1" || !p.estimated_rate) continue;
    if (p.arrival < join)
      before = *p.estimated_rate;
    else if (before)
      worst_shift = std::max(worst_shift, std::abs(*p.estimated_rate - *before));
  }
  const double e2 = estimate_of(run.outcome, "dev2");
  v.detail << std::setprecision(6) << "dev2 " << e2 << " Hz, dev1 before join " << before.value_or(std::nan(""))
           << ", largest dev1 shift after join " << worst_shift << ", " << run.seconds << " s";
  v.require(run.outcome.exit_code == kExitOk, "run exit code 0");
  v.require(std::abs(e2 - 2.641) <= 0.01, "dev2 within 0.01 of 2.641");
  v.require(before.has_value() && worst_shift < 0.005, "dev1 shift < 0.005");
  v.require(run.seconds < 10.0, "run < 10 s");
  return v;
}

Verdict resource_boundary() {
  Verdict v;
  const auto cfg = scenario("scenario_b.cfg");
  const auto run = timed_run(cfg);
  // Steady state: every window has refilled after the join renegotiation.
  double lo = 1e300, hi = -1e300, max_rate = 0.0;
  for (const auto& s : run.outcome.usage) {
    if (s.t_s < 300.0) continue;
    lo = std::min(lo, s.usage.total_data_rate);
    hi = std::max(hi, s.usage.total_data_rate);
    max_rate = std::max(max_rate, s.usage.total_rate);
  }
  v.detail << std::setprecision(6) << "data usage " << lo << ".." << hi << " of 15, max total rate " << max_rate
           << ", congestion errors " << run.outcome.sink_congestion_errors;
  v.require(lo <= hi, "steady-state samples exist");
  v.require(std::abs(lo - 15.0) <= 0.3 && std::abs(hi - 15.0) <= 0.3, "data usage within 2% of 15");
  v.require(max_rate < 10.0, "total rate < 10");
  v.require(run.outcome.sink_congestion_errors == 0, "zero congestion");
  return v;
}

Verdict anomaly_detection() {
  Verdict v;
  const auto cfg = scenario("anomaly.cfg");
  const auto run = timed_run(cfg);
  const auto& anomalies = run.outcome.anomalies;
  std::size_t dev2_events = 0;
  for (const auto& a : anomalies) dev2_events += a.device_id == "dev2" ? 1 : 0;
  std::optional<std::size_t> packets_to_alert;
  const auto started = run.outcome.manipulation_started.find("dev2");
  if (dev2_events == 1 && started != run.outcome.manipulation_started.end()) {
    std::size_t count = 0;
    for (const auto& p : run.outcome.packets)
      if (p.device_id == "dev2" && p.arrival >= started->second && p.arrival <= anomalies.front().detected_at) ++count;
    packets_to_alert = count;
  }

  auto clean = cfg;
  for (auto& dev : clean.devices) dev.manipulation.reset();
  const auto quiet = timed_run(clean);
  auto clean_auto = scenario("scenario_b.cfg");
  clean_auto.duration_s = 300.0;
  const auto quiet_auto = timed_run(clean_auto);

  v.detail << "events " << anomalies.size() << " (dev2 " << dev2_events << ")";
  if (packets_to_alert) v.detail << ", alert after " << *packets_to_alert << " manipulated packets";
  v.detail << ", unmanipulated runs: " << quiet.outcome.anomalies.size() << " (delta 0.2), "
           << quiet_auto.outcome.anomalies.size() << " (auto delta)";
  v.require(anomalies.size() == 1 && dev2_events == 1, "exactly one event, for dev2");
  v.require(packets_to_alert && *packets_to_alert <= 300, "within 300 packets of activation");
  v.require(quiet.outcome.anomalies.empty() && quiet_auto.outcome.anomalies.empty(), "no events unmanipulated");
  v.require(run.seconds < 10.0 && quiet.seconds < 10.0 && quiet_auto.seconds < 10.0, "runs < 10 s");
  return v;
}

Verdict projection_equivalence() {
  Verdict v;
  Rng rng(8080);
  double worst = 0.0;
  std::set<std::size_t> sizes;
  for (int i = 0; i < 500; ++i) {
    const auto set = random_constraint_set(rng, 5);
    const auto point = random_point(rng, set.size());
    sizes.insert(set.size());
    worst = std::max(worst, max_abs_diff(project_onto_constraints(point, set), oracle::project_kkt(point, set)));
  }
  v.detail << "500 instances, N in 1.." << *sizes.rbegin() << ", worst coordinate gap " << worst;
  v.require(worst <= 1e-6, "within 1e-6");
  v.require(sizes.size() == 5, "every N from 1 to 5 drawn");
  return v;
}

Verdict solver_equivalence() {
  Verdict v;
  Rng rng(9090);
  double worst = 0.0;
  int converged = 0;
  for (int i = 0; i < 100; ++i) {
    const auto set = random_constraint_set(rng, 5);
    const auto fs = random_utilities(rng, set);
    const auto result = solve_centralized(fs, set);
    converged += result.converged() ? 1 : 0;
    worst = std::max(worst, max_abs_diff(result.x_star, oracle::solve_oracle(fs, set)));
  }
  v.detail << "100 instances, " << converged << " converged, worst max-norm gap " << worst;
  v.require(worst <= 1e-3, "within 1e-3");
  return v;
}

// Field names that may legitimately appear in a wire record or the state dump.
const std::set<std::string> kWireFields{"tag",  "device_id", "round",      "a",    "gamma",          "index",
                                        "rho",  "c",         "d",          "s",    "z",              "seq",
                                        "send_ts_us", "size", "estimated_rate", "reference_z", "delta"};
const std::set<std::string> kStateFields{"c",          "d",          "rho",     "round",        "negotiating",
                                         "members",    "device_id",  "a",       "gamma",        "latest_s",
                                         "latest_z",   "reference_z", "arrivals", "estimated_rate", "alert_active",
                                         "anomalies",  "sink_records", "sink_congestion_errors"};

struct Scan {
  std::vector<std::string> hits;
  std::vector<double> numbers;
};

// Walks a JSON value collecting unexpected keys, numeric arrays and every
// numeric leaf. Keys below a "z" map are device ids.
void scan(const nlohmann::json& j, const std::set<std::string>& fields, Scan& out, bool device_keys = false) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      if (!device_keys && !fields.count(key)) out.hits.push_back("key " + key);
      scan(value, fields, out, key == "z");
    }
  } else if (j.is_array()) {
    for (const auto& item : j) {
      if (item.is_number()) out.hits.push_back("numeric array");
      scan(item, fields, out);
    }
  } else if (j.is_number()) {
    out.numbers.push_back(j.get<double>());
  }
}

// A single number can match a coefficient by chance (a seq of 484, say); a
// utility representation needs several coefficients of one device together.
void check_coefficients(const Scan& scanned, const ScenarioConfig& cfg, std::vector<std::string>& hits) {
  for (const auto& dev : cfg.devices) {
    std::size_t present = 0;
    for (double coeff : dev.utility)
      if (std::abs(coeff) >= 10.0 && std::count(scanned.numbers.begin(), scanned.numbers.end(), coeff)) ++present;
    if (present >= 2) hits.push_back("coefficients of " + dev.id);
  }
}

Verdict privacy() {
  Verdict v;
  const auto cfg = scenario("scenario_b.cfg");
  const auto run = timed_run(cfg);
  std::vector<std::string> hits;
  for (const auto& line : run.outcome.wire_log) {
    std::istringstream in(line);
    std::string at, from, to, record;
    in >> at >> from >> to;
    std::getline(in >> std::ws, record);
    Scan scanned;
    scan(nlohmann::json::parse(record), kWireFields, scanned);
    check_coefficients(scanned, cfg, scanned.hits);
    hits.insert(hits.end(), scanned.hits.begin(), scanned.hits.end());
  }
  const std::size_t wire_hits = hits.size();
  Scan state;
  scan(run.outcome.gateway_state, kStateFields, state);
  check_coefficients(state, cfg, state.hits);
  hits.insert(hits.end(), state.hits.begin(), state.hits.end());
  v.detail << run.outcome.wire_log.size() << " wire records, " << wire_hits << " findings; state dump "
           << hits.size() - wire_hits << " findings";
  if (!hits.empty()) v.detail << ", first: " << hits.front();
  v.require(!run.outcome.wire_log.empty(), "wire log recorded");
  v.require(hits.empty(), "no utility representation");
  return v;
}

Verdict determinism() {
  Verdict v;
  const auto cfg = scenario("scenario_b.cfg");
  const auto first = timed_run(cfg, {.seed = 42, .write_artifacts = false});
  const auto second = timed_run(cfg, {.seed = 42, .write_artifacts = false});
  std::string a, b;
  for (const auto& line : first.outcome.event_log) a += line + "\n";
  for (const auto& line : second.outcome.event_log) b += line + "\n";
  v.detail << first.outcome.event_log.size() << " events, " << a.size() << " bytes";
  v.require(!a.empty() && a == b, "byte-identical event logs");
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Verdict (*check)();
  };
  const std::vector<Criterion> criteria{
      {"scenario A optimum", scenario_a_optimum},
      {"scenario B optimum", scenario_b_optimum},
      {"reference allocations", baselines},
      {"end-to-end rate fidelity", rate_fidelity},
      {"dynamic join", dynamic_join},
      {"resource boundary", resource_boundary},
      {"anomaly detection", anomaly_detection},
      {"projection oracle equivalence", projection_equivalence},
      {"solver oracle equivalence", solver_equivalence},
      {"privacy invariant", privacy},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict verdict;
    try {
      verdict = criteria[i].check();
    } catch (const std::exception& e) {
      verdict.pass = false;
      verdict.detail << "exception: " << e.what();
    }
    failures += verdict.pass ? 0 : 1;
    std::cout << (verdict.pass ? "PASS" : "FAIL") << " " << std::setw(2) << i + 1 << " " << criteria[i].name << ": "
              << verdict.detail.str() << "\n";
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
