#include "txfreq/admm.hpp"

#include <cmath>
#include <numeric>

#include "txfreq/errors.hpp"
#include "txfreq/projection.hpp"

namespace txfreq {

double local_x_update(const UtilityFunction& f, double z_i, double u_i, double rho) {
  if (!(rho > 0.0)) throw RejectedInput("rho must be positive");
  const double target = z_i - u_i;
  const auto slope = [&](double x) { return f.derivative(x) - rho * (x - target); };

  double lo = 0.0;
  double hi = f.domain_max();
  if (slope(lo) <= 0.0) return lo;
  if (slope(hi) >= 0.0) return hi;
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    if (slope(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

Residuals residuals(const AdmmIterate& prev, const AdmmIterate& next) {
  const std::size_t n = next.x.size();
  if (next.z.size() != n || prev.z.size() != n)
    throw RejectedInput("iterates must have equal lengths");
  double primal = 0.0;
  double dual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    primal += (next.x[i] - next.z[i]) * (next.x[i] - next.z[i]);
    dual += (next.z[i] - prev.z[i]) * (next.z[i] - prev.z[i]);
  }
  return {std::sqrt(primal), next.rho * std::sqrt(dual)};
}

SolveResult solve_centralized(std::span<const UtilityFunction> utilities, const ConstraintSet& set,
                              const SolveOptions& options) {
  const std::size_t n = utilities.size();
  if (n == 0) throw RejectedInput("at least one utility is required");
  if (set.size() != n) throw RejectedInput("utility count does not match constraint set");
  if (!(options.rho > 0.0)) throw RejectedInput("rho must be positive");

  AdmmIterate current;
  current.x = set.gamma();
  current.z = set.gamma();
  current.u.assign(n, 0.0);
  current.rho = options.rho;

  SolveResult result;
  result.trace.push_back(current);
  std::vector<double> masked(n);

  for (int k = 1; k <= options.max_iter; ++k) {
    AdmmIterate next;
    next.rho = options.rho;
    next.k = k;
    next.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      next.x[i] = local_x_update(utilities[i], current.z[i], current.u[i], options.rho);
      masked[i] = next.x[i] + current.u[i];
    }
    next.z = project_onto_constraints(masked, set);
    next.u.resize(n);
    for (std::size_t i = 0; i < n; ++i) next.u[i] = dual_update(current.u[i], next.x[i], next.z[i]);

    const Residuals r = residuals(current, next);
    next.primal_residual = r.primal;
    next.dual_residual = r.dual;
    result.trace.push_back(next);
    current = std::move(next);

    if (r.primal < options.tol && r.dual < options.tol) {
      result.status = SolveStatus::converged;
      break;
    }
  }
  result.x_star = current.z;
  return result;
}

double total_utility(std::span<const UtilityFunction> utilities, std::span<const double> x) {
  if (utilities.size() != x.size()) throw RejectedInput("utility count does not match rate vector");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += utilities[i].eval(x[i]);
  return sum;
}

std::vector<double> average_allocation(double c, std::size_t n) {
  if (n == 0) throw RejectedInput("at least one device is required");
  return std::vector<double>(n, c / static_cast<double>(n));
}

std::vector<double> proportional_allocation(double c, std::span<const double> a) {
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  if (!(total > 0.0)) throw RejectedInput("data sizes must sum to a positive value");
  std::vector<double> x;
  x.reserve(a.size());
  for (double ai : a) x.push_back(ai * c / total);
  return x;
}

}  // namespace txfreq
