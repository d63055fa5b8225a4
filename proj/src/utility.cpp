#include "txfreq/utility.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "txfreq/errors.hpp"

namespace txfreq {
namespace {

double horner(const std::vector<double>& coefficients, double x) {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<double> differentiate(const std::vector<double>& coefficients) {
  std::vector<double> out;
  for (std::size_t k = 1; k < coefficients.size(); ++k)
    out.push_back(static_cast<double>(k) * coefficients[k]);
  return out;
}

}  // namespace

UtilityFunction::UtilityFunction(std::vector<double> coefficients, double domain_max)
    : coefficients_(std::move(coefficients)), domain_max_(domain_max) {
  if (coefficients_.empty()) throw RejectedInput("utility polynomial needs at least one coefficient");
  if (!std::all_of(coefficients_.begin(), coefficients_.end(),
                   [](double v) { return std::isfinite(v); }))
    throw RejectedInput("utility coefficients must be finite");
  if (!std::isfinite(domain_max_) || domain_max_ <= 0.0)
    throw RejectedInput("utility domain_max must be positive and finite");
  first_ = differentiate(coefficients_);
  second_ = differentiate(first_);
}

void UtilityFunction::check_domain(double x) const {
  if (!(x >= 0.0 && x <= domain_max_)) {
    std::ostringstream msg;
    msg << "rate " << x << " Hz outside utility domain [0, " << domain_max_ << "]";
    throw RejectedInput(msg.str());
  }
}

double UtilityFunction::eval(double x) const {
  check_domain(x);
  return horner(coefficients_, x);
}

double UtilityFunction::derivative(double x) const {
  check_domain(x);
  return horner(first_, x);
}

double UtilityFunction::second_derivative(double x) const {
  check_domain(x);
  return horner(second_, x);
}

ConcavityReport validate_concavity(const UtilityFunction& f, double grid_step) {
  if (!(grid_step > 0.0)) throw RejectedInput("grid step must be positive");
  const auto steps = static_cast<std::size_t>(std::ceil(f.domain_max() / grid_step));
  for (std::size_t i = 0; i <= steps; ++i) {
    const double x = std::min(static_cast<double>(i) * grid_step, f.domain_max());
    const double curvature = f.second_derivative(x);
    if (!(curvature < 0.0) || !std::isfinite(f.eval(x))) return {false, x};
  }
  return {};
}

double default_domain_max(double c, double d, std::span<const double> a) {
  if (a.empty()) throw RejectedInput("at least one data size is required");
  const double min_a = *std::min_element(a.begin(), a.end());
  if (!(min_a > 0.0)) throw RejectedInput("data sizes must be positive");
  return std::max(c, d / min_a) + 1.0;
}

}  // namespace txfreq
