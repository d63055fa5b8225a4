#include "txfreq/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "txfreq/errors.hpp"

namespace txfreq {

ConstraintSet::ConstraintSet(double c, double d, std::vector<double> a, std::vector<double> gamma)
    : c_(c), d_(d), a_(std::move(a)), gamma_(std::move(gamma)) {
  if (a_.empty()) throw RejectedInput("constraint set needs at least one device");
  if (a_.size() != gamma_.size()) throw RejectedInput("a and gamma must have equal length");
  if (!(c_ > 0.0) || !std::isfinite(c_)) throw RejectedInput("c must be positive");
  if (!(d_ > 0.0) || !std::isfinite(d_)) throw RejectedInput("d must be positive");
  for (std::size_t i = 0; i < a_.size(); ++i) {
    if (!(a_[i] > 0.0) || !std::isfinite(a_[i])) throw RejectedInput("every a_i must be positive");
    if (!(gamma_[i] >= 0.0) || !std::isfinite(gamma_[i]))
      throw RejectedInput("every gamma_i must be non-negative");
  }
  const double rate_floor = std::accumulate(gamma_.begin(), gamma_.end(), 0.0);
  const double data_floor = std::inner_product(a_.begin(), a_.end(), gamma_.begin(), 0.0);
  if (rate_floor > c_) {
    std::ostringstream msg;
    msg << "infeasible: sum of minimum rates " << rate_floor << " exceeds c=" << c_;
    throw InfeasibleConstraints(msg.str());
  }
  if (data_floor > d_) {
    std::ostringstream msg;
    msg << "infeasible: minimum data rate " << data_floor << " exceeds d=" << d_;
    throw InfeasibleConstraints(msg.str());
  }
}

double ConstraintSet::max_violation(std::span<const double> z) const {
  if (z.size() != size()) throw RejectedInput("vector length does not match constraint set");
  double total = 0.0;
  double data = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    total += z[i];
    data += a_[i] * z[i];
    worst = std::max(worst, gamma_[i] - z[i]);
  }
  worst = std::max(worst, total - c_);
  worst = std::max(worst, data - d_);
  return worst;
}

}  // namespace txfreq
