#pragma once

// Finite-support asymptotics: the limit Gaussian of the constraint vector,
// the auxiliary linear program driving the estimator's limit distribution,
// Monte Carlo sampling of that limit law, and Liu-style confidence sets built
// from the optimal basis of the empirical program.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "otproj/estimators.hpp"
#include "otproj/finite_lp.hpp"
#include "otproj/rng.hpp"

namespace otproj {

struct LimitGaussianSpec {
  std::vector<std::vector<double>> marg_probs;  // full s_i probability vectors
  std::vector<double> joint_probs;              // s_0 probabilities
  double lambda = 0.5;                          // m / (n + m)
  double rate = 0.0;                            // sqrt(n m / (n + m))
};

inline LimitGaussianSpec make_gaussian_spec(const FiniteLP& lp,
                                            const std::vector<std::vector<double>>& marg_probs,
                                            const std::vector<double>& joint_probs,
                                            double n, double m) {
  if (marg_probs.size() != lp.num_coords())
    throw std::invalid_argument("gaussian spec: K mismatch");
  for (std::size_t i = 0; i < marg_probs.size(); ++i)
    if (marg_probs[i].size() != lp.s[i])
      throw std::invalid_argument("gaussian spec: marginal block size mismatch");
  if (joint_probs.size() != lp.s0)
    throw std::invalid_argument("gaussian spec: joint block size mismatch");
  LimitGaussianSpec spec;
  spec.marg_probs = marg_probs;
  spec.joint_probs = joint_probs;
  spec.lambda = m / (n + m);
  spec.rate = std::sqrt(n * m / (n + m));
  return spec;
}

// Plug-in spec from the empirical inputs the LP was built on.
inline LimitGaussianSpec make_plugin_spec(const FiniteLP& lp, const MarginalSystem& marginals,
                                          const JointMeasure& pi0_m, double n, double m) {
  std::vector<std::vector<double>> mp;
  for (std::size_t i = 0; i < marginals.num_coords(); ++i)
    mp.push_back(marginals.coord(i).weights());
  return make_gaussian_spec(lp, mp, pi0_m.weights(), n, m);
}

namespace detail {

// Centered multinomial Gaussian draw: g = sqrt(p) z - p (sqrt(p) . z); the
// block always sums to zero.
inline void multinomial_gaussian(const std::vector<double>& p, Rng& rng,
                                 std::vector<double>& out) {
  const std::size_t s = p.size();
  out.resize(s);
  double dot = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    const double z = rng.normal();
    out[i] = std::sqrt(p[i]) * z;
    dot += std::sqrt(p[i]) * z;
  }
  for (std::size_t i = 0; i < s; ++i) out[i] -= p[i] * dot;
}

}  // namespace detail

// One draw of the limit Gaussian in the rank-repaired coordinates:
// sqrt(lambda)-scaled truncated marginal blocks, then the sqrt(1-lambda)
// joint block.
inline void sample_limit_gaussian_draw(const LimitGaussianSpec& spec, Rng& rng,
                                       std::vector<double>& out) {
  out.clear();
  std::vector<double> block;
  const double sl = std::sqrt(spec.lambda);
  for (const auto& p : spec.marg_probs) {
    detail::multinomial_gaussian(p, rng, block);
    for (std::size_t i = 0; i + 1 < block.size(); ++i) out.push_back(sl * block[i]);
  }
  detail::multinomial_gaussian(spec.joint_probs, rng, block);
  const double sj = std::sqrt(1.0 - spec.lambda);
  for (double v : block) out.push_back(sj * v);
}

inline std::vector<std::vector<double>> sample_limit_gaussian(const LimitGaussianSpec& spec,
                                                              std::size_t count,
                                                              std::uint64_t seed) {
  for (const auto& p : spec.marg_probs)
    for (double v : p)
      if (!(v >= 0.0)) throw std::invalid_argument("gaussian spec: negative probability");
  for (double v : spec.joint_probs)
    if (!(v >= 0.0)) throw std::invalid_argument("gaussian spec: negative probability");
  Rng rng(seed);
  std::vector<std::vector<double>> out(count);
  for (std::size_t d = 0; d < count; ++d) sample_limit_gaussian_draw(spec, rng, out[d]);
  return out;
}

// Truncated block-diagonal covariance of the limit Gaussian.
inline Eigen::MatrixXd limit_covariance(const LimitGaussianSpec& spec) {
  std::size_t dim = spec.joint_probs.size();
  for (const auto& p : spec.marg_probs) dim += p.size() - 1;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  std::size_t off = 0;
  for (const auto& p : spec.marg_probs) {
    const std::size_t s = p.size() - 1;
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j)
        cov(static_cast<Eigen::Index>(off + i), static_cast<Eigen::Index>(off + j)) =
            spec.lambda * ((i == j ? p[i] : 0.0) - p[i] * p[j]);
    off += s;
  }
  const std::size_t s0 = spec.joint_probs.size();
  for (std::size_t i = 0; i < s0; ++i)
    for (std::size_t j = 0; j < s0; ++j)
      cov(static_cast<Eigen::Index>(off + i), static_cast<Eigen::Index>(off + j)) =
          (1.0 - spec.lambda) *
          ((i == j ? spec.joint_probs[i] : 0.0) - spec.joint_probs[i] * spec.joint_probs[j]);
  return cov;
}

struct AuxLpResult {
  bool feasible = false;
  std::vector<double> p;  // length S_*, signed on the masked cells
  double value = 0.0;
};

// min <c,p> s.t. A p = g, with p free on the masked cells and p >= 0 off the
// mask. Free cells are split into positive and negative parts.
inline AuxLpResult auxiliary_lp(const FiniteLP& lp, const std::vector<double>& g,
                                const std::vector<std::size_t>& mask) {
  if (g.size() != lp.num_rows) throw std::invalid_argument("auxiliary_lp: rhs size mismatch");
  const std::size_t extra = mask.size();
  const std::size_t n = lp.num_vars + extra;
  std::vector<double> a(lp.num_rows * n, 0.0);
  std::vector<double> c(n, 0.0);
  for (std::size_t r = 0; r < lp.num_rows; ++r) {
    double* dst = &a[r * n];
    const double* src = &lp.a[r * lp.num_vars];
    std::copy(src, src + lp.num_vars, dst);
    for (std::size_t t = 0; t < extra; ++t) dst[lp.num_vars + t] = -src[mask[t]];
  }
  for (std::size_t j = 0; j < lp.num_vars; ++j) c[j] = lp.cost[j];
  for (std::size_t t = 0; t < extra; ++t) c[lp.num_vars + t] = -lp.cost[mask[t]];

  LpResult r = solve_dense_lp(std::move(a), lp.num_rows, n, g, std::move(c));
  AuxLpResult out;
  if (r.status == LpStatus::Infeasible) return out;
  if (r.status == LpStatus::Unbounded)
    throw std::runtime_error("auxiliary_lp: unbounded (cost should be >= 0 off-mask)");
  out.feasible = true;
  out.p.assign(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(lp.num_vars));
  for (std::size_t t = 0; t < extra; ++t) out.p[mask[t]] -= r.x[lp.num_vars + t];
  out.value = r.value;
  return out;
}

enum class DiagonalMask { Plugin, FullSupport };

// Diagonal-support mask: cells (x(z), z). Plugin keeps the cells the solved
// coupling actually charges; FullSupport keeps every diagonal cell, the
// sensitivity alternative.
inline std::vector<std::size_t> diagonal_mask(const FiniteLP& lp,
                                              const std::vector<double>& gamma,
                                              DiagonalMask mode,
                                              double floor = 1e-12) {
  std::vector<std::size_t> mask;
  std::vector<std::size_t> levels;
  for (std::size_t z = 0; z < lp.s0; ++z) {
    const std::size_t xi = lp.diagonal_x_cell(z);
    if (xi == FiniteLP::npos) continue;
    const std::size_t cell = xi * lp.s0 + z;
    if (mode == DiagonalMask::FullSupport || gamma[cell] > floor) mask.push_back(cell);
  }
  return mask;
}

struct LimitMcResult {
  std::vector<double> sample;       // functional values of the limit law
  std::size_t infeasible_draws = 0; // draws whose auxiliary LP had no feasible point
};

// Monte Carlo sample of the limit distribution of the plugged-in functional:
// draw the limit Gaussian, solve the auxiliary LP, push the solution onto the
// x block and apply the functional's derivative at the reference estimate.
inline LimitMcResult limit_distribution_mc(const FiniteLP& lp, const LimitGaussianSpec& spec,
                                           const Functional& functional, std::size_t draws,
                                           std::uint64_t seed,
                                           DiagonalMask mask_mode = DiagonalMask::Plugin) {
  LpSolution sol = solve_lp(lp);
  const std::vector<Point> x_atoms = lp.x_atoms();
  const std::vector<double> pi_ref = lp.x_pushforward(sol.gamma);
  const std::vector<double> grad = functional.gradient(x_atoms, pi_ref);
  const std::vector<std::size_t> mask = diagonal_mask(lp, sol.gamma, mask_mode);

  LimitMcResult out;
  out.sample.reserve(draws);
  Rng rng(seed);
  std::vector<double> g;
  for (std::size_t d = 0; d < draws; ++d) {
    sample_limit_gaussian_draw(spec, rng, g);
    AuxLpResult aux = auxiliary_lp(lp, g, mask);
    if (!aux.feasible) {
      ++out.infeasible_draws;
      continue;
    }
    const std::vector<double> dpi = lp.x_pushforward(aux.p);
    double v = 0.0;
    for (std::size_t xi = 0; xi < dpi.size(); ++xi) v += grad[xi] * dpi[xi];
    out.sample.push_back(v);
  }
  return out;
}

// Liu-style confidence interval from the optimal basis of the empirical LP.
// G_alpha is the (1-alpha) Mahalanobis ellipsoid of the limit Gaussian under
// the pseudo-inverted plug-in covariance (chi-squared threshold at the
// covariance's numerical rank); draws inside it map through
// gamma(I_n; G) = A_I^{-1} G on the basis, push forward to the x block, and
// the functional's derivative at the point estimate turns each into a scalar.
inline IntervalResult liu_confidence_interval(const FiniteLP& lp, const LpSolution& sol,
                                              const LimitGaussianSpec& spec,
                                              const Functional& functional, double alpha,
                                              std::size_t mc_draws, std::uint64_t seed) {
  const std::size_t rows = lp.num_rows;
  Eigen::MatrixXd a_basis(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < rows; ++k)
      a_basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          lp.a[r * lp.num_vars + sol.basis[k]];
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a_basis);
  {
    const double det = std::abs(lu.determinant());
    if (!(det > 0.0) || !std::isfinite(det))
      throw std::runtime_error("liu interval: singular basis matrix");
  }

  const Eigen::MatrixXd cov = limit_covariance(spec);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd evals = es.eigenvalues();
  const double ev_max = evals.cwiseAbs().maxCoeff();
  const double ev_floor = std::max(1e-14, ev_max * 1e-10);
  int rank = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i)
    if (evals(i) > ev_floor) ++rank;

  double chi2_threshold = 0.0;
  if (alpha < 1.0 && rank > 0) {
    boost::math::chi_squared chi2(static_cast<double>(rank));
    chi2_threshold = boost::math::quantile(chi2, 1.0 - alpha);
  }

  const std::vector<Point> x_atoms = lp.x_atoms();
  const std::vector<double> pi_hat = lp.x_pushforward(sol.gamma);
  const double estimate = functional.value(x_atoms, pi_hat);
  const std::vector<double> grad = functional.gradient(x_atoms, pi_hat);

  Rng rng(seed);
  std::vector<double> g;
  Eigen::VectorXd gv(static_cast<Eigen::Index>(rows));
  double vmin = 0.0, vmax = 0.0;
  bool any = false;
  for (std::size_t d = 0; d < mc_draws; ++d) {
    sample_limit_gaussian_draw(spec, rng, g);
    for (std::size_t i = 0; i < rows; ++i) gv(static_cast<Eigen::Index>(i)) = g[i];
    // Mahalanobis via the eigen basis, pseudo-inverting small eigenvalues.
    const Eigen::VectorXd y = es.eigenvectors().transpose() * gv;
    double maha = 0.0;
    for (Eigen::Index i = 0; i < evals.size(); ++i)
      if (evals(i) > ev_floor) maha += y(i) * y(i) / evals(i);
    if (alpha >= 1.0 || maha > chi2_threshold) continue;

    const Eigen::VectorXd coeff = lu.solve(gv);
    double v = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
      const std::size_t cell = sol.basis[k];
      v += grad[cell / lp.s0] * coeff(static_cast<Eigen::Index>(k));
    }
    if (!any) {
      vmin = vmax = v;
      any = true;
    } else {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }

  IntervalResult out;
  out.estimate = estimate;
  out.alpha = alpha;
  out.method = "liu";
  out.resamples = mc_draws;
  out.seed = seed;
  if (!any) {
    out.lo = out.hi = estimate;
    return out;
  }
  out.lo = estimate - vmax / spec.rate;
  out.hi = estimate - vmin / spec.rate;
  return out;
}

}  // namespace otproj
