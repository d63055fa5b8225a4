#pragma once

#include <span>
#include <vector>

#include "txfreq/constraints.hpp"

namespace txfreq {

struct DykstraOptions {
  double tolerance = 1e-10;  // max-norm change between successive cycles
  int max_cycles = 10000;
};

/// Euclidean projection of v onto the constraint polytope.
///
/// Dykstra's alternating projections over the rate halfspace, the data
/// halfspace and the minimum-rate box, each sub-projection in closed form.
/// After every cycle the face suggested by Dykstra's corrections is solved
/// exactly and accepted once it passes the KKT conditions, which avoids the
/// slow tail Dykstra shows with nearly parallel halfspaces. Throws
/// NumericalFailure (with the last iterate) if neither test succeeds within
/// max_cycles.
std::vector<double> project_onto_constraints(std::span<const double> v, const ConstraintSet& set,
                                             const DykstraOptions& options = {});

}  // namespace txfreq
