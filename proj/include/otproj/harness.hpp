#pragma once

// Simulation data generators and the experiment drivers behind the
// `simulate` CLI subcommand: the bivariate-normal study (covariance and CDF
// estimates under entropic shadows with fixed and cross-validated eta) and
// the finite-support study (conditional-probability estimates with the full
// set of confidence-interval methods).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "otproj/estimators.hpp"
#include "otproj/finite_inference.hpp"
#include "otproj/measures.hpp"
#include "otproj/rng.hpp"
#include "otproj/shadow.hpp"
#include "otproj/threads.hpp"

namespace otproj {

// ---------------------------------------------------------------------------
// Generators

struct GaussianSimSpec {
  double rho = 0.0;
  std::size_t m = 100;
  std::size_t n = 500;
  std::uint64_t seed = 0;
};

// m + n i.i.d. bivariate normal pairs; the first m stay coupled, the rest are
// decoupled and each coordinate is permuted independently.
inline DataSet gen_gaussian(const GaussianSimSpec& spec) {
  Rng rng(spec.seed);
  const std::size_t total = spec.m + spec.n;
  std::vector<Point> rows(total);
  const double mix = std::sqrt(1.0 - spec.rho * spec.rho);
  for (std::size_t i = 0; i < total; ++i) {
    const double z1 = rng.normal();
    const double z2 = spec.rho * z1 + mix * rng.normal();
    rows[i] = {z1, z2};
  }
  DataSet data;
  data.coupled_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(spec.m));
  std::vector<std::vector<Point>> cols(2);
  for (std::size_t c = 0; c < 2; ++c) {
    cols[c].reserve(spec.n);
    for (std::size_t i = spec.m; i < total; ++i) cols[c].push_back({rows[i][c]});
    for (std::size_t i = cols[c].size(); i > 1; --i)
      std::swap(cols[c][i - 1], cols[c][rng.below(i)]);
    data.marginals.push_back(MarginalColumn::from_samples(cols[c]));
  }
  return data;
}

struct DiscreteSimSpec {
  std::size_t m = 1000;
  std::size_t n = 100000;
  std::uint64_t seed = 0;
};

// The 2 x 4 x 5 law concentrated on (2,4,*): 7/105 on (2,4,z3) for z3 <= 4,
// 42/105 on (2,4,5), 1/105 elsewhere.
inline void discrete105_cells(std::vector<Point>& atoms, std::vector<double>& probs) {
  atoms.clear();
  probs.clear();
  for (int z1 = 1; z1 <= 2; ++z1)
    for (int z2 = 1; z2 <= 4; ++z2)
      for (int z3 = 1; z3 <= 5; ++z3) {
        atoms.push_back({static_cast<double>(z1), static_cast<double>(z2),
                         static_cast<double>(z3)});
        double p = 1.0 / 105.0;
        if (z1 == 2 && z2 == 4) p = (z3 == 5) ? 42.0 / 105.0 : 7.0 / 105.0;
        probs.push_back(p);
      }
}

inline JointMeasure discrete105_law() {
  std::vector<Point> atoms;
  std::vector<double> probs;
  discrete105_cells(atoms, probs);
  return JointMeasure(std::vector<std::size_t>(3, 1), std::move(atoms), std::move(probs));
}

inline Functional discrete105_psi() {
  return Functional::conditional_prob({{2, 5.0}}, {{0, 2.0}, {1, 4.0}});
}

inline constexpr double kDiscrete105Psi0 = 0.6;

inline DataSet gen_discrete105(const DiscreteSimSpec& spec) {
  std::vector<Point> atoms;
  std::vector<double> probs;
  discrete105_cells(atoms, probs);
  std::vector<double> cum(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) cum[i] = (acc += probs[i]);

  Rng rng(spec.seed);
  auto draw = [&]() -> std::size_t {
    const double u = rng.uniform() * acc;
    return static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(),
                                 static_cast<std::ptrdiff_t>(probs.size() - 1)));
  };

  DataSet data;
  data.coupled_rows.reserve(spec.m);
  for (std::size_t i = 0; i < spec.m; ++i) data.coupled_rows.push_back(atoms[draw()]);
  // Decoupled block: per-coordinate counts of the remaining n draws. The
  // per-coordinate permutation of a categorical column only reorders equal
  // values, so counts carry the full information.
  std::vector<std::vector<std::uint64_t>> counts(3);
  std::vector<std::vector<Point>> levels(3);
  levels[0] = {{1}, {2}};
  levels[1] = {{1}, {2}, {3}, {4}};
  levels[2] = {{1}, {2}, {3}, {4}, {5}};
  for (std::size_t c = 0; c < 3; ++c) counts[c].assign(levels[c].size(), 0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Point& row = atoms[draw()];
    ++counts[0][static_cast<std::size_t>(row[0]) - 1];
    ++counts[1][static_cast<std::size_t>(row[1]) - 1];
    ++counts[2][static_cast<std::size_t>(row[2]) - 1];
  }
  for (std::size_t c = 0; c < 3; ++c)
    data.marginals.push_back(MarginalColumn::from_counts(levels[c], std::move(counts[c])));
  return data;
}

// Bivariate standard normal CDF via the single-integral correlation form,
// Gauss-Legendre on [0, rho].
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double bivariate_normal_cdf(double h, double k, double rho) {
  static const double nodes[] = {
      -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
      -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
      -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
      0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
      0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
      0.9894009349916499};
  static const double wts[] = {
      0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
      0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
      0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
      0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
      0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
      0.0271524594117541};
  double integral = 0.0;
  const double half = rho / 2.0;
  for (int i = 0; i < 16; ++i) {
    const double r = half + half * nodes[i];
    const double d = 1.0 - r * r;
    integral += wts[i] * std::exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * d)) /
                std::sqrt(d);
  }
  integral *= half / (2.0 * std::acos(-1.0));
  return std_normal_cdf(h) * std_normal_cdf(k) + integral;
}

// ---------------------------------------------------------------------------
// Infinite-support study (covariance / CDF of the entropic shadow)

struct Table1Config {
  std::vector<double> rhos{0.0, 0.25, 0.75};
  std::vector<std::size_t> ratios{5, 10, 25};
  std::vector<std::size_t> ms{50, 100, 200};
  std::vector<double> fixed_etas{1.0, std::pow(2.0, -6.0)};
  bool with_cv = true;
  std::vector<double> cv_etas{1.0,        std::pow(2.0, -1.0), std::pow(2.0, -2.0),
                              std::pow(2.0, -3.0), std::pow(2.0, -4.0),
                              std::pow(2.0, -5.0), std::pow(2.0, -6.0)};
  std::size_t cv_folds = 5;
  std::size_t cv_reps = 10;
  std::size_t replications = 200;
  bool include_cdf = false;  // adds the F(-0.25,-0.25) metrics
  double sinkhorn_tol = 1e-9;
  std::size_t sinkhorn_max_iter = 200000;
  std::uint64_t seed = 20240601;
  std::size_t threads = 0;
};

struct Table1Row {
  double rho = 0.0;
  std::size_t ratio = 0;
  std::size_t m = 0;
  // estimator label -> RMSE of the covariance estimate (and optionally cdf)
  std::vector<std::pair<std::string, double>> rmse_cov;
  std::vector<std::pair<std::string, double>> rmse_cdf;
  double avg_log2_eta_cv = 0.0;
  std::size_t replications = 0;
};

struct Table1Report {
  std::vector<Table1Row> rows;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

namespace detail {

struct GaussianRepResult {
  double rho_tilde = 0.0;
  std::vector<double> rho_hat;  // per fixed eta, then cv
  double cdf_tilde = 0.0;
  std::vector<double> cdf_hat;
  double log2_eta_cv = 0.0;
};

inline GaussianRepResult table1_replication(double rho, std::size_t m, std::size_t ratio,
                                            std::uint64_t seed, const Table1Config& cfg) {
  GaussianSimSpec spec{rho, m, ratio * m, seed};
  DataSet data = gen_gaussian(spec);
  const JointMeasure coupled = data.coupled_measure();
  const MarginalSystem marginals = data.marginal_system();
  const CostSpec cost = CostSpec::uniform(2, Metric::Euclidean, 2.0);

  GaussianRepResult out;
  {
    double m11 = 0.0, m1 = 0.0, m2 = 0.0, cdf = 0.0;
    const double inv = 1.0 / static_cast<double>(data.m());
    for (const auto& row : data.coupled_rows) {
      m11 += row[0] * row[1];
      m1 += row[0];
      m2 += row[1];
      if (row[0] <= -0.25 && row[1] <= -0.25) cdf += 1.0;
    }
    out.rho_tilde = m11 * inv - (m1 * inv) * (m2 * inv);
    out.cdf_tilde = cdf * inv;
  }

  double eta_cv = 0.0;
  if (cfg.with_cv) {
    CvConfig cv;
    cv.etas = cfg.cv_etas;
    cv.folds = cfg.cv_folds;
    cv.reps = cfg.cv_reps;
    cv.seed = derive_seed(seed, 0x5eedc);
    cv.sinkhorn_tol = cfg.sinkhorn_tol;
    cv.sinkhorn_max_iter = cfg.sinkhorn_max_iter;
    eta_cv = cv_select_eta(data.coupled_rows, cost, cv).eta_cv;
    out.log2_eta_cv = std::log2(eta_cv);
  }

  std::vector<double> etas = cfg.fixed_etas;
  if (cfg.with_cv) etas.push_back(eta_cv);
  // Solve the eta grid largest-first so warm starts carry over; indices map
  // the results back to the request order.
  std::vector<std::size_t> order(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return etas[a] > etas[b]; });

  out.rho_hat.assign(etas.size(), 0.0);
  out.cdf_hat.assign(etas.size(), 0.0);
  std::vector<std::vector<double>> warm_f(2), warm_g(2);
  std::vector<DiscreteMeasure> nus;
  for (std::size_t c = 0; c < 2; ++c) nus.push_back(marginalize(coupled, c));
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const double eta = etas[order[oi]];
    std::vector<DisintegrationKernel> kernels;
    std::vector<double> costs(2, 0.0), kls(2, 0.0);
    for (std::size_t c = 0; c < 2; ++c) {
      SinkhornOptions opt;
      opt.tol = cfg.sinkhorn_tol;
      opt.max_iter = cfg.sinkhorn_max_iter;
      opt.adaptive_overrelax = true;
      if (!warm_f[c].empty()) {
        opt.f0 = &warm_f[c];
        opt.g0 = &warm_g[c];
      }
      EntropicPlan plan =
          sinkhorn(marginals.coord(c), nus[c], cost.coord(c), cost.p(), eta, opt);
      warm_f[c] = plan.f;
      warm_g[c] = plan.g;
      costs[c] = plan.transport_cost();
      kls[c] = plan.kl_term();
      kernels.push_back(disintegrate(plan));
    }
    ProjectionResult proj(coupled, std::move(kernels), std::move(costs), std::move(kls),
                          cost.p(), ProjectionMode::Entropic, eta);
    auto identity = [](std::span<const double> x) { return x[0]; };
    auto one = [](std::span<const double>) { return 1.0; };
    auto below = [](std::span<const double> x) { return x[0] <= -0.25 ? 1.0 : 0.0; };
    const double m11 = proj.expect_product({identity, identity});
    const double m1 = proj.expect_product({identity, one});
    const double m2 = proj.expect_product({one, identity});
    out.rho_hat[order[oi]] = m11 - m1 * m2;
    if (cfg.include_cdf) out.cdf_hat[order[oi]] = proj.expect_product({below, below});
  }
  return out;
}

inline double rmse(const std::vector<double>& errors) {
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

}  // namespace detail

inline Table1Report run_table1(const Table1Config& cfg) {
  Table1Report report;
  report.seed = cfg.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t threads = cfg.threads ? cfg.threads : default_threads();

  std::size_t cell_id = 0;
  for (double rho : cfg.rhos) {
    for (std::size_t ratio : cfg.ratios) {
      for (std::size_t m : cfg.ms) {
        const std::size_t reps = cfg.replications;
        std::vector<detail::GaussianRepResult> results(reps);
        const std::uint64_t cell_seed = derive_seed(cfg.seed, cell_id++);
        parallel_for(reps, threads, [&](std::size_t r) {
          results[r] = detail::table1_replication(rho, m, ratio, derive_seed(cell_seed, r),
                                                  cfg);
        });

        Table1Row row;
        row.rho = rho;
        row.ratio = ratio;
        row.m = m;
        row.replications = reps;
        const double true_cdf =
            cfg.include_cdf ? bivariate_normal_cdf(-0.25, -0.25, rho) : 0.0;

        std::vector<double> err_tilde, err_cdf_tilde;
        for (const auto& res : results) {
          err_tilde.push_back(res.rho_tilde - rho);
          if (cfg.include_cdf) err_cdf_tilde.push_back(res.cdf_tilde - true_cdf);
        }
        row.rmse_cov.push_back({"tilde", detail::rmse(err_tilde)});
        if (cfg.include_cdf) row.rmse_cdf.push_back({"tilde", detail::rmse(err_cdf_tilde)});

        std::size_t n_eta = cfg.fixed_etas.size() + (cfg.with_cv ? 1 : 0);
        for (std::size_t e = 0; e < n_eta; ++e) {
          std::string label = (cfg.with_cv && e + 1 == n_eta)
                                  ? "eta_cv"
                                  : "eta=" + std::to_string(cfg.fixed_etas[e]);
          std::vector<double> err, errc;
          for (const auto& res : results) {
            err.push_back(res.rho_hat[e] - rho);
            if (cfg.include_cdf) errc.push_back(res.cdf_hat[e] - true_cdf);
          }
          row.rmse_cov.push_back({label, detail::rmse(err)});
          if (cfg.include_cdf) row.rmse_cdf.push_back({label, detail::rmse(errc)});
        }
        if (cfg.with_cv) {
          double s = 0.0;
          for (const auto& res : results) s += res.log2_eta_cv;
          row.avg_log2_eta_cv = s / static_cast<double>(reps);
        }
        report.rows.push_back(std::move(row));
      }
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------------------
// Finite-support study (psi = P(Z3=5 | Z1=2, Z2=4) with four CI methods)

struct Table3Config {
  std::vector<std::size_t> ms{1000};
  std::size_t n = 100000;
  std::size_t replications = 300;
  double alpha = 0.05;
  std::size_t bootstrap_resamples = 1000;
  std::size_t subsample_resamples = 500;
  std::size_t liu_draws = 2000;
  bool run_bootstrap = true;
  bool run_subsampling = true;
  bool run_liu = true;
  std::uint64_t seed = 20240602;
  std::size_t threads = 0;
};

struct CiSummary {
  double coverage = 0.0;
  double avg_length = 0.0;
};

struct Table3Row {
  std::size_t m = 0;
  std::size_t n = 0;
  double bias_tilde = 0.0, bias_hat = 0.0;
  double rmse_tilde = 0.0, rmse_hat = 0.0;
  CiSummary tilde_boot, hat_boot, hat_subsample, hat_liu;
  std::size_t replications = 0;
};

struct Table3Report {
  std::vector<Table3Row> rows;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

inline CostSpec discrete105_cost() { return CostSpec::uniform(3, Metric::AbsDiff, 1.0); }

// psi-hat: the x-block pushforward of the solved projection LP, evaluated at
// the conditional-probability functional.
inline double discrete105_psi_hat(const DataSet& data) {
  const JointMeasure coupled = data.coupled_measure();
  const MarginalSystem marginals = data.marginal_system();
  const FiniteLP lp = build_lp(coupled, marginals, discrete105_cost());
  const LpSolution sol = solve_lp(lp);
  return discrete105_psi().value(lp.x_atoms(), lp.x_pushforward(sol.gamma));
}

inline double discrete105_psi_tilde(const DataSet& data) {
  return discrete105_psi().value(data.coupled_measure());
}

namespace detail {

struct Table3RepResult {
  double psi_tilde = 0.0, psi_hat = 0.0;
  IntervalResult tilde_boot, hat_boot, hat_subsample, hat_liu;
  bool has_boot = false, has_ss = false, has_liu = false;
};

inline Table3RepResult table3_replication(std::size_t m, const Table3Config& cfg,
                                          std::uint64_t seed) {
  DataSet data = gen_discrete105({m, cfg.n, seed});
  Table3RepResult out;
  out.psi_tilde = discrete105_psi_tilde(data);
  out.psi_hat = discrete105_psi_hat(data);

  const EstimatorPipeline tilde_pipeline = [](const DataSet& d) {
    return discrete105_psi_tilde(d);
  };
  const EstimatorPipeline hat_pipeline = [](const DataSet& d) {
    return discrete105_psi_hat(d);
  };

  if (cfg.run_bootstrap) {
    BootstrapConfig bc;
    bc.resamples = cfg.bootstrap_resamples;
    bc.alpha = cfg.alpha;
    bc.seed = derive_seed(seed, 0xb001);
    out.tilde_boot = bootstrap_ci(tilde_pipeline, data, bc);
    bc.seed = derive_seed(seed, 0xb002);
    out.hat_boot = bootstrap_ci(hat_pipeline, data, bc);
    out.has_boot = true;
  }
  if (cfg.run_subsampling) {
    SubsamplingConfig sc;
    sc.resamples = cfg.subsample_resamples;
    sc.alpha = cfg.alpha;
    sc.seed = derive_seed(seed, 0x55aa);
    out.hat_subsample = subsampling_ci(hat_pipeline, data, sc);
    out.has_ss = true;
  }
  if (cfg.run_liu) {
    const JointMeasure coupled = data.coupled_measure();
    const MarginalSystem marginals = data.marginal_system();
    const FiniteLP lp = build_lp(coupled, marginals, discrete105_cost());
    const LpSolution sol = solve_lp(lp);
    const LimitGaussianSpec spec = make_plugin_spec(
        lp, marginals, coupled, static_cast<double>(cfg.n), static_cast<double>(m));
    out.hat_liu = liu_confidence_interval(lp, sol, spec, discrete105_psi(), cfg.alpha,
                                          cfg.liu_draws, derive_seed(seed, 0x11d7));
    out.has_liu = true;
  }
  return out;
}

inline CiSummary summarize_ci(const std::vector<IntervalResult>& intervals, double truth) {
  CiSummary s;
  if (intervals.empty()) return s;
  for (const auto& ci : intervals) {
    if (ci.lo <= truth && truth <= ci.hi) s.coverage += 1.0;
    s.avg_length += ci.hi - ci.lo;
  }
  s.coverage /= static_cast<double>(intervals.size());
  s.avg_length /= static_cast<double>(intervals.size());
  return s;
}

}  // namespace detail

inline Table3Report run_table3(const Table3Config& cfg) {
  Table3Report report;
  report.seed = cfg.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t threads = cfg.threads ? cfg.threads : default_threads();

  std::size_t cell_id = 0;
  for (std::size_t m : cfg.ms) {
    const std::size_t reps = cfg.replications;
    std::vector<detail::Table3RepResult> results(reps);
    const std::uint64_t cell_seed = derive_seed(cfg.seed, cell_id++);
    parallel_for(reps, threads, [&](std::size_t r) {
      results[r] = detail::table3_replication(m, cfg, derive_seed(cell_seed, r));
    });

    Table3Row row;
    row.m = m;
    row.n = cfg.n;
    row.replications = reps;
    std::vector<double> err_tilde, err_hat;
    std::vector<IntervalResult> tb, hb, hs, hl;
    for (const auto& res : results) {
      err_tilde.push_back(res.psi_tilde - kDiscrete105Psi0);
      err_hat.push_back(res.psi_hat - kDiscrete105Psi0);
      if (res.has_boot) {
        tb.push_back(res.tilde_boot);
        hb.push_back(res.hat_boot);
      }
      if (res.has_ss) hs.push_back(res.hat_subsample);
      if (res.has_liu) hl.push_back(res.hat_liu);
    }
    for (double e : err_tilde) row.bias_tilde += e / static_cast<double>(reps);
    for (double e : err_hat) row.bias_hat += e / static_cast<double>(reps);
    row.rmse_tilde = detail::rmse(err_tilde);
    row.rmse_hat = detail::rmse(err_hat);
    row.tilde_boot = detail::summarize_ci(tb, kDiscrete105Psi0);
    row.hat_boot = detail::summarize_ci(hb, kDiscrete105Psi0);
    row.hat_subsample = detail::summarize_ci(hs, kDiscrete105Psi0);
    row.hat_liu = detail::summarize_ci(hl, kDiscrete105Psi0);
    report.rows.push_back(row);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace otproj
