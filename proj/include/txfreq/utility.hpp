#pragma once

#include <optional>
#include <span>
#include <vector>

namespace txfreq {

/// A device's private utility f(x) over its rate x in Hz, stored as a dense
/// polynomial (constant term first) valid on [0, domain_max].
class UtilityFunction {
 public:
  UtilityFunction(std::vector<double> coefficients, double domain_max);

  /// Polynomial value; throws RejectedInput outside [0, domain_max].
  double eval(double x) const;
  /// Exact first derivative; throws RejectedInput outside [0, domain_max].
  double derivative(double x) const;
  double second_derivative(double x) const;

  const std::vector<double>& coefficients() const { return coefficients_; }
  double domain_max() const { return domain_max_; }

 private:
  void check_domain(double x) const;

  std::vector<double> coefficients_;
  std::vector<double> first_;
  std::vector<double> second_;
  double domain_max_;
};

struct ConcavityReport {
  bool ok = true;
  std::optional<double> first_violation;
};

/// Strict concavity on a grid of [0, domain_max] with the given step.
ConcavityReport validate_concavity(const UtilityFunction& f, double grid_step = 0.01);

/// max(c, d / min a_i) + 1 Hz: no feasible rate can exceed this.
double default_domain_max(double c, double d, std::span<const double> a);

}  // namespace txfreq
