#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

#include "txfreq/errors.hpp"
#include "txfreq/report.hpp"
#include "txfreq/runner.hpp"
#include "txfreq/scenario.hpp"

using namespace txfreq;

namespace {

void print_utility_row(const char* name, double value, const std::optional<double>& reference) {
  std::cout << "  " << std::left << std::setw(14) << name << std::fixed << std::setprecision(4) << value;
  if (reference)
    std::cout << "   reference " << std::setprecision(2) << *reference << "   gap " << std::setprecision(4)
              << (*reference - value);
  std::cout << '\n' << std::defaultfloat;
}

int cmd_solve(const std::filesystem::path& config_path) {
  const auto config = load_scenario(config_path);
  const auto report = solve_scenario(config);
  std::cout << "status " << (report.result.converged() ? "converged" : "max_iter") << " after "
            << report.result.trace.size() << " iterations\n";
  for (std::size_t i = 0; i < report.device_ids.size(); ++i)
    std::cout << "  x*[" << report.device_ids[i] << "] = " << std::setprecision(10) << report.result.x_star[i] << '\n';
  std::cout << "total utility\n";
  print_utility_row("admm", report.admm_utility, config.reference_utility.admm);
  print_utility_row("average", report.average_utility, config.reference_utility.average);
  print_utility_row("proportional", report.proportional_utility, config.reference_utility.proportional);
  if (!report.result.converged()) {
    std::cerr << "solver did not converge within max_iter\n";
    return kExitNonConvergence;
  }
  return kExitOk;
}

int cmd_run(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out,
            const std::optional<std::uint64_t>& seed) {
  const auto config = load_scenario(config_path);
  RunOptions options;
  options.output_dir = out;
  options.seed = seed;
  const auto outcome = run_scenario(config, options);
  if (outcome.exit_code != kExitOk) {
    std::cerr << outcome.error << '\n';
    return outcome.exit_code;
  }
  std::cout << "device  theoretical  estimated\n";
  for (const auto& s : outcome.summary) {
    std::cout << std::left << std::setw(8) << s.device_id << std::setw(13) << s.theoretical;
    if (s.estimated) std::cout << *s.estimated;
    std::cout << '\n';
  }
  std::cout << "anomalies " << outcome.anomalies.size() << ", sink congestion errors "
            << outcome.sink_congestion_errors << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized transmission-frequency negotiation and monitoring"};
  app.require_subcommand(1);

  std::filesystem::path config_path;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run a scenario and write artifacts");
  run->add_option("--config", config_path, "Scenario file")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Transport jitter seed");

  auto* solve = app.add_subcommand("solve", "Solve centrally and compare with baselines");
  solve->add_option("--config", config_path, "Scenario file")->required();

  std::filesystem::path report_dir;
  auto* report = app.add_subcommand("report", "Build plot-ready tables from a run directory");
  report->add_option("--out", report_dir, "Run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir, seed);
    if (*solve) return cmd_solve(config_path);
    if (*report) return write_report(report_dir, std::cout);
  } catch (const InfeasibleConstraints& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "config: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
