#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace txfreq {

/// The shared resource polytope {z : sum z_i <= c, sum a_i z_i <= d, z_i >= gamma_i}.
///
/// c is the maximum total writing frequency (Hz), d the data budget per second,
/// a_i the data size each write of device i consumes and gamma_i its minimum
/// rate. Construction throws InfeasibleConstraints when the set is empty.
class ConstraintSet {
 public:
  ConstraintSet(double c, double d, std::vector<double> a, std::vector<double> gamma);

  double c() const { return c_; }
  double d() const { return d_; }
  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& gamma() const { return gamma_; }
  std::size_t size() const { return a_.size(); }

  /// Largest violation over the three constraint families (0 when feasible).
  double max_violation(std::span<const double> z) const;
  bool contains(std::span<const double> z, double tolerance = 1e-9) const {
    return max_violation(z) <= tolerance;
  }

 private:
  double c_;
  double d_;
  std::vector<double> a_;
  std::vector<double> gamma_;
};

}  // namespace txfreq
