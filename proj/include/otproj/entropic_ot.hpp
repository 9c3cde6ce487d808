#pragma once

// Entropy-regularized pairwise optimal transport:
//   min_{gamma in Pi(mu,nu)}  <d^p, gamma> + eta * KL(gamma || mu x nu).
// Sinkhorn iterations run in the log domain (stabilized log-sum-exp sweeps),
// which keeps eta as small as 2^-10 workable with squared costs. eta applies
// to the p-th-power cost. Potentials can be warm-started, which the eta-grid
// callers (cross-validation, Gamma-convergence scans) rely on.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "otproj/measures.hpp"

namespace otproj {

struct SinkhornNonConvergence : std::runtime_error {
  SinkhornNonConvergence(double v, std::size_t iters)
      : std::runtime_error("sinkhorn: marginal violation " + std::to_string(v) +
                           " after " + std::to_string(iters) + " sweeps"),
        violation(v), iterations(iters) {}
  double violation;
  std::size_t iterations;
};

struct EntropicPlan {
  DiscreteMeasure row_measure;
  DiscreteMeasure col_measure;
  std::vector<double> matrix;    // dense row-major |mu| x |nu| coupling
  std::vector<double> cost_pow;  // d(x,z)^p, same layout
  std::vector<double> f, g;      // dual potentials, gamma = mu nu exp((f+g-c)/eta)
  double eta = 0.0;
  double p = 2.0;
  std::size_t iterations = 0;
  double marginal_violation = 0.0;

  std::size_t rows() const { return row_measure.size(); }
  std::size_t cols() const { return col_measure.size(); }

  double transport_cost() const {
    double s = 0.0;
    for (std::size_t i = 0; i < matrix.size(); ++i) s += matrix[i] * cost_pow[i];
    return s;
  }

  // KL(gamma || mu x nu) with 0 log 0 := 0; entries are strictly positive on
  // the full grid by the Gibbs form, so the reference never vanishes first.
  double kl_term() const {
    double s = 0.0;
    const std::size_t c = cols();
    for (std::size_t a = 0; a < rows(); ++a) {
      const double mu_a = row_measure.weights()[a];
      for (std::size_t b = 0; b < c; ++b) {
        const double g_ab = matrix[a * c + b];
        if (g_ab > 0.0) s += g_ab * std::log(g_ab / (mu_a * col_measure.weights()[b]));
      }
    }
    return s;
  }

  std::vector<double> row_sums() const {
    std::vector<double> s(rows(), 0.0);
    const std::size_t c = cols();
    for (std::size_t a = 0; a < rows(); ++a)
      for (std::size_t b = 0; b < c; ++b) s[a] += matrix[a * c + b];
    return s;
  }
  std::vector<double> col_sums() const {
    std::vector<double> s(cols(), 0.0);
    const std::size_t c = cols();
    for (std::size_t a = 0; a < rows(); ++a)
      for (std::size_t b = 0; b < c; ++b) s[b] += matrix[a * c + b];
    return s;
  }
};

inline double entropic_objective(const EntropicPlan& plan) {
  return plan.transport_cost() + plan.eta * plan.kl_term();
}

struct SinkhornOptions {
  double tol = 1e-9;
  std::size_t max_iter = 10000;
  const std::vector<double>* f0 = nullptr;  // warm-start potentials
  const std::vector<double>* g0 = nullptr;
  bool track_dual = false;
  std::vector<double>* dual_trace = nullptr;  // recorded every 10 sweeps
  // Safeguarded overrelaxation, on by default. Near-tied transport routes
  // slow the plain iteration to rate 1 - e^(-gap/eta), whose rounding-noise
  // ball can sit above tol; aiming theta at the SOR optimum for the observed
  // rate shrinks both. theta stays at 1 (the plain update) until the rate
  // estimate warrants more, and divergence resets it.
  bool adaptive_overrelax = true;
};

inline EntropicPlan sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const CoordMetric& metric, double p, double eta,
                             const SinkhornOptions& opt = {}) {
  if (!(eta > 0.0)) throw std::invalid_argument("sinkhorn: eta must be > 0");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("sinkhorn: tol must be > 0");
  if (mu.dim() != nu.dim())
    throw std::invalid_argument("sinkhorn: coordinate dimension mismatch");

  const std::size_t r = mu.size(), c = nu.size();
  EntropicPlan plan{mu, nu};
  plan.eta = eta;
  plan.p = p;
  plan.cost_pow.resize(r * c);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = 0; b < c; ++b)
      plan.cost_pow[a * c + b] = std::pow(metric.distance(mu.atoms()[a], nu.atoms()[b]), p);

  // Scaled cost and its transpose for cache-friendly column sweeps.
  std::vector<double> srow(r * c), scol(c * r);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = 0; b < c; ++b) {
      const double v = plan.cost_pow[a * c + b] / eta;
      srow[a * c + b] = v;
      scol[b * r + a] = v;
    }

  std::vector<double> log_mu(r), log_nu(c);
  for (std::size_t a = 0; a < r; ++a) log_mu[a] = std::log(mu.weights()[a]);
  for (std::size_t b = 0; b < c; ++b) log_nu[b] = std::log(nu.weights()[b]);

  std::vector<double>& f = plan.f;
  std::vector<double>& g = plan.g;
  f.assign(r, 0.0);
  g.assign(c, 0.0);
  if (opt.f0 && opt.f0->size() == r) f = *opt.f0;
  if (opt.g0 && opt.g0->size() == c) g = *opt.g0;

  std::vector<double> ub(c), ua(r), tf(r), tg(c);
  double violation = std::numeric_limits<double>::infinity();
  double prev_violation = std::numeric_limits<double>::infinity();
  double theta = 1.0;
  double rate_estimate = 0.0;
  bool rate_valid = false;
  double window[10];
  std::fill(window, window + 10, std::numeric_limits<double>::infinity());
  bool converged = false;
  bool cols_exact = false;  // true once g has been updated at least once
  std::size_t sweep = 0;
  for (; sweep < opt.max_iter && !converged; ++sweep) {
    // Row pass: t_a = -eta lse_b[(g_b - c_ab)/eta + log nu_b]; the current
    // row sum is mu_a exp((f_a - t_a)/eta), so the row violation comes free.
    for (std::size_t b = 0; b < c; ++b) ub[b] = g[b] / eta + log_nu[b];
    double row_violation = 0.0;
    for (std::size_t a = 0; a < r; ++a) {
      const double* s = &srow[a * c];
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < c; ++b) m = std::max(m, ub[b] - s[b]);
      double sum = 0.0;
      for (std::size_t b = 0; b < c; ++b) sum += std::exp(ub[b] - s[b] - m);
      const double t = -eta * (m + std::log(sum));
      row_violation = std::max(
          row_violation, mu.weights()[a] * std::abs(std::expm1((f[a] - t) / eta)));
      tf[a] = t;
    }
    if (cols_exact && row_violation <= opt.tol) {
      // Columns are exact from the last g update and rows are certified
      // within tol, so keep the current potentials.
      violation = row_violation;
      converged = true;
      break;
    }
    for (std::size_t a = 0; a < r; ++a) f[a] += theta * (tf[a] - f[a]);

    // Column pass, same structure with rows now exact.
    for (std::size_t a = 0; a < r; ++a) ua[a] = f[a] / eta + log_mu[a];
    double col_violation = 0.0;
    for (std::size_t b = 0; b < c; ++b) {
      const double* s = &scol[b * r];
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < r; ++a) m = std::max(m, ua[a] - s[a]);
      double sum = 0.0;
      for (std::size_t a = 0; a < r; ++a) sum += std::exp(ua[a] - s[a] - m);
      const double t = -eta * (m + std::log(sum));
      col_violation = std::max(
          col_violation, nu.weights()[b] * std::abs(std::expm1((g[b] - t) / eta)));
      tg[b] = t;
    }
    if (col_violation <= opt.tol) {
      violation = col_violation;
      converged = true;
      break;
    }
    for (std::size_t b = 0; b < c; ++b) g[b] += theta * (tg[b] - g[b]);
    cols_exact = true;
    violation = std::max(row_violation, col_violation);

    if (opt.adaptive_overrelax) {
      // Track the linear rate and aim theta at the SOR optimum for it; the
      // 10-sweep window guards against the oscillatory regime while catching
      // genuine stalls.
      if (prev_violation > 0.0 && std::isfinite(prev_violation) && violation > 0.0) {
        const double ratio = std::min(violation / prev_violation, 1.0 - 1e-13);
        rate_estimate = rate_valid ? 0.7 * rate_estimate + 0.3 * ratio : ratio;
        rate_valid = true;
      }
      if (violation > 10.0 * window[sweep % 10]) {
        theta = 1.0;  // genuine divergence, not the oscillatory SOR regime
        rate_valid = false;
      } else if (rate_valid && rate_estimate > 0.0) {
        const double gap = std::max(1e-13, 1.0 - rate_estimate * rate_estimate);
        theta = std::min(1.9999, 2.0 / (1.0 + std::sqrt(gap)));
      }
      window[sweep % 10] = violation;
      prev_violation = violation;
    }

    if (opt.track_dual && opt.dual_trace && sweep % 10 == 0) {
      double dual = 0.0;
      for (std::size_t a = 0; a < r; ++a) dual += f[a] * mu.weights()[a];
      for (std::size_t b = 0; b < c; ++b) dual += g[b] * nu.weights()[b];
      double mass = 0.0;
      for (std::size_t a = 0; a < r; ++a) {
        const double* s = &srow[a * c];
        const double base = (f[a] / eta) + log_mu[a];
        for (std::size_t b = 0; b < c; ++b)
          mass += std::exp(base + g[b] / eta + log_nu[b] - s[b]);
      }
      dual -= eta * (mass - 1.0);
      opt.dual_trace->push_back(dual);
    }
  }
  plan.iterations = sweep;
  plan.marginal_violation = violation;
  if (!converged) throw SinkhornNonConvergence(violation, sweep);

  plan.matrix.resize(r * c);
  for (std::size_t a = 0; a < r; ++a) {
    const double base = f[a] / eta + log_mu[a];
    const double* s = &srow[a * c];
    double* out = &plan.matrix[a * c];
    for (std::size_t b = 0; b < c; ++b)
      out[b] = std::exp(base + g[b] / eta + log_nu[b] - s[b]);
  }
  return plan;
}

}  // namespace otproj
