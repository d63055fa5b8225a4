#pragma once

#include <span>
#include <vector>

#include "txfreq/constraints.hpp"
#include "txfreq/utility.hpp"

namespace txfreq {

/// One ADMM iteration's state. x are local rates, z the feasible consensus
/// rates and u the scaled duals, all in Hz.
struct AdmmIterate {
  std::vector<double> x;
  std::vector<double> z;
  std::vector<double> u;
  double rho = 1.0;
  int k = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
};

/// argmax over [0, domain_max] of f(x) - (rho/2) (x - z_i + u_i)^2.
///
/// The penalized derivative is strictly decreasing, so its root is bracketed
/// and bisected to 1e-8; when it keeps one sign the maximizer is the
/// corresponding interval end.
double local_x_update(const UtilityFunction& f, double z_i, double u_i, double rho);

inline double dual_update(double u_i, double x_next, double z_next) { return u_i + x_next - z_next; }

/// primal = ||x_next - z_next||, dual = rho ||z_next - z_prev||.
Residuals residuals(const AdmmIterate& prev, const AdmmIterate& next);

struct SolveOptions {
  double rho = 1.0;
  double tol = 1e-4;
  int max_iter = 1000;
};

enum class SolveStatus { converged, max_iter_reached };

struct SolveResult {
  SolveStatus status = SolveStatus::max_iter_reached;
  std::vector<double> x_star;  // final z, always feasible
  std::vector<AdmmIterate> trace;

  bool converged() const { return status == SolveStatus::converged; }
};

/// Full consensus ADMM in one process, starting from x = z = gamma, u = 0.
SolveResult solve_centralized(std::span<const UtilityFunction> utilities, const ConstraintSet& set,
                              const SolveOptions& options = {});

double total_utility(std::span<const UtilityFunction> utilities, std::span<const double> x);

// Non-optimized reference allocations. They only share the rate cap c and may
// violate the data budget.
std::vector<double> average_allocation(double c, std::size_t n);
std::vector<double> proportional_allocation(double c, std::span<const double> a);

}  // namespace txfreq
