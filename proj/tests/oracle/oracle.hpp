#pragma once

// Independent reference solvers used only by the test suites. Nothing here
// calls into the Dykstra projection or the ADMM loop.

#include <cstdint>
#include <span>
#include <vector>

#include "txfreq/constraints.hpp"
#include "txfreq/utility.hpp"

namespace txfreq::oracle {

/// Exact projection by enumerating every (halfspace subset x box subset)
/// active set, solving its equality-constrained projection in closed form and
/// keeping the nearest feasible candidate.
std::vector<double> project_kkt(std::span<const double> v, const ConstraintSet& set);

/// Projected-gradient ascent from random feasible starts (projection by
/// project_kkt) refined by KKT enumeration over the active sets suggested by
/// the best ascent point. Meant for N <= 6.
std::vector<double> solve_oracle(std::span<const UtilityFunction> utilities, const ConstraintSet& set,
                                 std::uint64_t seed = 7, int starts = 100);

/// Brute-force argmax of f(x) - rho/2 (x - z + u)^2 on a uniform grid over
/// [0, domain_max].
double grid_argmax_penalized(const UtilityFunction& f, double z, double u, double rho, double step);

/// Brute-force argmax of f over [lo, hi] on a uniform grid.
double grid_argmax(const UtilityFunction& f, double lo, double hi, double step);

/// Uniformly scaled random feasible point: gamma + s * w with w >= 0.
template <class Rng>
std::vector<double> random_feasible_point(const ConstraintSet& set, Rng& rng);

}  // namespace txfreq::oracle

#include "oracle_impl.hpp"
