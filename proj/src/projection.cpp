#include "txfreq/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "txfreq/errors.hpp"

namespace txfreq {
namespace {

// In-place projection onto {y : normal . y <= bound}.
void project_halfspace(std::vector<double>& y, std::span<const double> normal, double bound,
                       double normal_sq) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += normal[i] * y[i];
  if (dot <= bound) return;
  const double step = (dot - bound) / normal_sq;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= step * normal[i];
}

struct FaceMultipliers {
  double lambda = 0.0;
  double mu = 0.0;
};

// Multipliers of the equality-constrained projection onto one face.
std::optional<FaceMultipliers> face_multipliers(std::span<const double> v, const ConstraintSet& set,
                                                bool rate_on, bool data_on, const std::vector<bool>& at_floor) {
  const auto& a = set.a();
  const auto& gamma = set.gamma();
  double k = 0.0, ka = 0.0, kaa = 0.0, rate_rhs = -set.c(), data_rhs = -set.d();
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (at_floor[i]) {
      rate_rhs += gamma[i];
      data_rhs += a[i] * gamma[i];
    } else {
      k += 1.0;
      ka += a[i];
      kaa += a[i] * a[i];
      rate_rhs += v[i];
      data_rhs += a[i] * v[i];
    }
  }
  FaceMultipliers m;
  if ((rate_on || data_on) && k == 0.0) return std::nullopt;
  if (rate_on && data_on) {
    const double det = k * kaa - ka * ka;
    if (std::abs(det) < 1e-12 * k * kaa) return std::nullopt;
    m.lambda = (rate_rhs * kaa - ka * data_rhs) / det;
    m.mu = (k * data_rhs - ka * rate_rhs) / det;
  } else if (rate_on) {
    m.lambda = rate_rhs / k;
  } else if (data_on) {
    m.mu = data_rhs / kaa;
  }
  return m;
}

// Exact finish from the active set Dykstra has settled on. Nearly parallel
// halfspaces make plain Dykstra crawl long after that set is known. The box
// set is refined by primal-dual active-set steps and the result is returned
// only if it meets every KKT condition.
std::optional<std::vector<double>> solve_face(std::span<const double> v, const ConstraintSet& set, bool rate_on,
                                              bool data_on, std::vector<bool> at_floor) {
  const std::size_t n = set.size();
  const auto& a = set.a();
  const auto& gamma = set.gamma();
  const double tol = 1e-12 * (1.0 + set.c() + set.d());
  for (std::size_t step = 0; step <= n; ++step) {
    const auto m = face_multipliers(v, set, rate_on, data_on, at_floor);
    if (!m) return std::nullopt;
    std::vector<double> z(n);
    std::vector<bool> below(n);
    bool settled = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double free_value = v[i] - m->lambda - m->mu * a[i];
      below[i] = free_value < gamma[i];
      if (below[i] != at_floor[i] && std::abs(free_value - gamma[i]) > tol) settled = false;
      z[i] = at_floor[i] ? gamma[i] : free_value;
    }
    if (settled) {
      if (m->lambda < -tol || m->mu < -tol || set.max_violation(z) > tol) return std::nullopt;
      for (std::size_t i = 0; i < n; ++i) z[i] = std::max(z[i], gamma[i]);
      return z;
    }
    at_floor = below;
  }
  return std::nullopt;
}

}  // namespace

std::vector<double> project_onto_constraints(std::span<const double> v, const ConstraintSet& set,
                                             const DykstraOptions& options) {
  const std::size_t n = set.size();
  if (v.size() != n) throw RejectedInput("projection input length does not match constraint set");

  const std::vector<double> ones(n, 1.0);
  const auto& a = set.a();
  const auto& gamma = set.gamma();
  double a_sq = 0.0;
  for (double ai : a) a_sq += ai * ai;

  std::vector<double> x(v.begin(), v.end());
  std::vector<double> rate_corr(n, 0.0), data_corr(n, 0.0), box_corr(n, 0.0);
  std::vector<double> y(n), w(n), next(n), y_prev(n, 0.0), w_prev(n, 0.0);

  for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + rate_corr[i];
    const std::vector<double> y_in = y;
    project_halfspace(y, ones, set.c(), static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) rate_corr[i] = y_in[i] - y[i];

    for (std::size_t i = 0; i < n; ++i) w[i] = y[i] + data_corr[i];
    const std::vector<double> w_in = w;
    project_halfspace(w, a, set.d(), a_sq);
    for (std::size_t i = 0; i < n; ++i) data_corr[i] = w_in[i] - w[i];

    // Dykstra can crawl for many cycles with the three sub-iterates apart, so
    // besides settling they have to agree (the point is then in all three sets).
    double change = cycle == 0 ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      change = std::max({change, std::abs(y[i] - y_prev[i]), std::abs(w[i] - w_prev[i])});
      y_prev[i] = y[i];
      w_prev[i] = w[i];
      const double shifted = w[i] + box_corr[i];
      next[i] = std::max(shifted, gamma[i]);
      box_corr[i] = shifted - next[i];
      change = std::max({change, std::abs(next[i] - x[i]), std::abs(next[i] - y[i]), std::abs(next[i] - w[i])});
    }
    x.swap(next);
    if (change < options.tolerance) return x;

    // A slack halfspace can keep a decaying correction for thousands of
    // cycles, so every halfspace combination is tried with the box set.
    // The correction-based box set can be one coordinate off and make the
    // face singular, so its single flips and the all-free set are tried too.
    std::vector<std::vector<bool>> starts(1, std::vector<bool>(n));
    for (std::size_t i = 0; i < n; ++i) starts[0][i] = box_corr[i] < 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      starts.push_back(starts[0]);
      starts.back()[i] = !starts.back()[i];
    }
    starts.emplace_back(n, false);
    for (const auto& start : starts)
      for (unsigned face = 0; face < 4; ++face)
        if (auto exact = solve_face(v, set, face & 1U, face & 2U, start)) return *exact;
  }
  throw NumericalFailure("Dykstra projection did not converge within the cycle cap", x);
}

}  // namespace txfreq
