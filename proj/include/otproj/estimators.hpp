#pragma once

// Downstream functionals of an estimated coupling, resampling confidence
// intervals, and the repeated cross-validation selector for the entropic
// parameter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "otproj/entropic_ot.hpp"
#include "otproj/measures.hpp"
#include "otproj/rng.hpp"
#include "otproj/shadow.hpp"

namespace otproj {

struct UndefinedFunctional : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scalar functionals of a joint measure over flattened product-space atoms.
// Each kind exposes the exact value and the gradient in the atom weights;
// the gradient is what plugs into the linear-program limit theory.
class Functional {
 public:
  enum class Kind { Covariance, Cdf, ConditionalProb, EventProb };

  using Event = std::vector<std::pair<std::size_t, double>>;  // (flat index, value)

  static Functional covariance(std::size_t i, std::size_t j) {
    Functional f;
    f.kind_ = Kind::Covariance;
    f.i_ = i;
    f.j_ = j;
    return f;
  }

  static Functional cdf(Point thresholds) {
    Functional f;
    f.kind_ = Kind::Cdf;
    f.thresholds_ = std::move(thresholds);
    return f;
  }

  static Functional conditional_prob(Event target, Event conditioning) {
    Functional f;
    f.kind_ = Kind::ConditionalProb;
    f.target_ = std::move(target);
    f.conditioning_ = std::move(conditioning);
    return f;
  }

  static Functional event_prob(Event target) {
    Functional f;
    f.kind_ = Kind::EventProb;
    f.target_ = std::move(target);
    return f;
  }

  Kind kind() const { return kind_; }

  double value(const std::vector<Point>& atoms, const std::vector<double>& w) const {
    switch (kind_) {
      case Kind::Covariance: {
        double mij = 0.0, mi = 0.0, mj = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
          mij += w[k] * atoms[k][i_] * atoms[k][j_];
          mi += w[k] * atoms[k][i_];
          mj += w[k] * atoms[k][j_];
        }
        return mij - mi * mj;
      }
      case Kind::Cdf: {
        double s = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k)
          if (below(atoms[k])) s += w[k];
        return s;
      }
      case Kind::EventProb: {
        double s = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k)
          if (matches(atoms[k], target_)) s += w[k];
        return s;
      }
      case Kind::ConditionalProb: {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
          if (matches(atoms[k], conditioning_)) {
            den += w[k];
            if (matches(atoms[k], target_)) num += w[k];
          }
        }
        if (den <= 0.0)
          throw UndefinedFunctional("conditional probability: zero conditioning mass");
        return num / den;
      }
    }
    throw std::logic_error("unreachable");
  }

  double value(const JointMeasure& pi) const { return value(pi.atoms(), pi.weights()); }

  // d value / d w_k at the given weights.
  std::vector<double> gradient(const std::vector<Point>& atoms,
                               const std::vector<double>& w) const {
    std::vector<double> g(atoms.size(), 0.0);
    switch (kind_) {
      case Kind::Covariance: {
        double mi = 0.0, mj = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
          mi += w[k] * atoms[k][i_];
          mj += w[k] * atoms[k][j_];
        }
        for (std::size_t k = 0; k < atoms.size(); ++k)
          g[k] = atoms[k][i_] * atoms[k][j_] - mi * atoms[k][j_] - mj * atoms[k][i_];
        return g;
      }
      case Kind::Cdf: {
        for (std::size_t k = 0; k < atoms.size(); ++k) g[k] = below(atoms[k]) ? 1.0 : 0.0;
        return g;
      }
      case Kind::EventProb: {
        for (std::size_t k = 0; k < atoms.size(); ++k)
          g[k] = matches(atoms[k], target_) ? 1.0 : 0.0;
        return g;
      }
      case Kind::ConditionalProb: {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
          if (matches(atoms[k], conditioning_)) {
            den += w[k];
            if (matches(atoms[k], target_)) num += w[k];
          }
        }
        if (den <= 0.0)
          throw UndefinedFunctional("conditional probability: zero conditioning mass");
        const double psi = num / den;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
          if (!matches(atoms[k], conditioning_)) continue;
          const double in_target = matches(atoms[k], target_) ? 1.0 : 0.0;
          g[k] = (in_target - psi) / den;
        }
        return g;
      }
    }
    throw std::logic_error("unreachable");
  }

 private:
  bool below(const Point& atom) const {
    for (std::size_t t = 0; t < thresholds_.size(); ++t)
      if (atom[t] > thresholds_[t]) return false;
    return true;
  }
  static bool matches(const Point& atom, const Event& ev) {
    for (const auto& [idx, val] : ev)
      if (atom[idx] != val) return false;
    return true;
  }

  Kind kind_ = Kind::EventProb;
  std::size_t i_ = 0, j_ = 0;
  Point thresholds_;
  Event target_, conditioning_;
};

inline double evaluate(const Functional& f, const JointMeasure& pi) { return f.value(pi); }

// ---------------------------------------------------------------------------
// Data bundle shared by resampling and the simulation harness: coupled rows
// plus per-coordinate decoupled samples. Marginal columns are stored as
// distinct atoms with counts so discrete columns of 10^5+ draws resample in
// time proportional to the draw count, not to repeated point materialization.
struct MarginalColumn {
  std::vector<Point> atoms;            // distinct, canonical order
  std::vector<std::uint64_t> counts;   // per atom, all positive
  std::uint64_t total = 0;

  static MarginalColumn from_samples(const std::vector<Point>& raw) {
    DiscreteMeasure m = DiscreteMeasure::from_samples(raw);
    MarginalColumn col;
    col.atoms = m.atoms();
    col.counts.reserve(m.size());
    const double n = static_cast<double>(raw.size());
    for (double w : m.weights())
      col.counts.push_back(static_cast<std::uint64_t>(std::llround(w * n)));
    col.total = raw.size();
    return col;
  }

  static MarginalColumn from_counts(std::vector<Point> atoms,
                                    std::vector<std::uint64_t> counts) {
    MarginalColumn col;
    col.total = 0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (counts[i] == 0) continue;
      col.atoms.push_back(std::move(atoms[i]));
      col.counts.push_back(counts[i]);
      col.total += counts[i];
    }
    if (col.total == 0) throw std::invalid_argument("marginal column: no mass");
    return col;
  }

  DiscreteMeasure measure() const {
    std::vector<double> w;
    w.reserve(counts.size());
    for (std::uint64_t c : counts)
      w.push_back(static_cast<double>(c) / static_cast<double>(total));
    return DiscreteMeasure(atoms, std::move(w));
  }
};

struct DataSet {
  std::vector<Point> coupled_rows;       // flattened K-vectors
  std::vector<MarginalColumn> marginals; // per coordinate

  std::size_t m() const { return coupled_rows.size(); }
  std::size_t n(std::size_t i) const { return marginals[i].total; }

  JointMeasure coupled_measure() const { return JointMeasure::from_rows(coupled_rows); }

  MarginalSystem marginal_system() const {
    std::vector<DiscreteMeasure> ms;
    std::vector<std::size_t> sizes;
    for (const auto& col : marginals) {
      ms.push_back(col.measure());
      sizes.push_back(col.total);
    }
    return MarginalSystem(std::move(ms), std::move(sizes));
  }
};

using EstimatorPipeline = std::function<double(const DataSet&)>;

struct IntervalResult {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double alpha = 0.05;
  std::string method;
  std::size_t resamples = 0;
  std::size_t subsample_size = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Type-7 empirical quantile (linear interpolation on order statistics).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  if (q <= 0.0) return v.front();
  if (q >= 1.0) return v.back();
  const double h = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

inline MarginalColumn resample_column(const MarginalColumn& col, Rng& rng) {
  std::vector<double> cum(col.counts.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < col.counts.size(); ++i)
    cum[i] = (acc += static_cast<double>(col.counts[i]));
  std::vector<std::uint64_t> counts(col.counts.size(), 0);
  for (std::uint64_t t = 0; t < col.total; ++t) {
    const double u = rng.uniform() * acc;
    const std::size_t idx = static_cast<std::size_t>(
        std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    ++counts[std::min(idx, counts.size() - 1)];
  }
  return MarginalColumn::from_counts(col.atoms, std::move(counts));
}

inline DataSet resample_with_replacement(const DataSet& data, Rng& rng,
                                         bool resample_marginals) {
  DataSet out;
  out.coupled_rows.reserve(data.m());
  for (std::size_t i = 0; i < data.m(); ++i)
    out.coupled_rows.push_back(data.coupled_rows[rng.below(data.m())]);
  out.marginals.reserve(data.marginals.size());
  for (const auto& col : data.marginals)
    out.marginals.push_back(resample_marginals ? resample_column(col, rng) : col);
  return out;
}

}  // namespace detail

struct BootstrapConfig {
  std::size_t resamples = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool resample_marginals = true;  // alternative: hold the marginal data fixed
  std::size_t max_retries = 5;
};

// Percentile bootstrap over re-runs of the full pipeline; coupled rows are
// resampled with replacement and each marginal column independently.
inline IntervalResult bootstrap_ci(const EstimatorPipeline& pipeline, const DataSet& data,
                                   const BootstrapConfig& cfg = {}) {
  if (cfg.resamples < 100)
    throw std::invalid_argument("bootstrap: need at least 100 resamples");
  std::vector<double> stats;
  stats.reserve(cfg.resamples);
  for (std::size_t b = 0; b < cfg.resamples; ++b) {
    Rng rng(derive_seed(cfg.seed, b));
    bool done = false;
    for (std::size_t attempt = 0; attempt <= cfg.max_retries && !done; ++attempt) {
      DataSet res = detail::resample_with_replacement(data, rng, cfg.resample_marginals);
      try {
        stats.push_back(pipeline(res));
        done = true;
      } catch (const UndefinedFunctional&) {
        // redraw
      }
    }
    if (!done) throw std::runtime_error("bootstrap: resample kept failing after retries");
  }
  IntervalResult out;
  out.estimate = pipeline(data);
  out.lo = detail::quantile(stats, cfg.alpha / 2.0);
  out.hi = detail::quantile(stats, 1.0 - cfg.alpha / 2.0);
  out.alpha = cfg.alpha;
  out.method = "bootstrap";
  out.resamples = cfg.resamples;
  out.seed = cfg.seed;
  return out;
}

struct SubsamplingConfig {
  std::size_t subsample_size = 0;  // 0: ceil(m^(2/3))
  std::size_t resamples = 500;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

// m-out-of-n bootstrap: subsample without replacement at size b (marginal
// columns at n_b = ceil(n b / m)), center at the full-data statistic, scale
// by the subsample rate r_b = sqrt(n_b b / (n_b + b)), and read the interval
// off the empirical quantiles of the scaled centered law.
inline IntervalResult subsampling_ci(const EstimatorPipeline& pipeline, const DataSet& data,
                                     const SubsamplingConfig& cfg = {}) {
  const std::size_t m = data.m();
  std::size_t b = cfg.subsample_size;
  if (b == 0) b = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(m), 2.0 / 3.0)));
  if (b >= m) throw std::invalid_argument("subsampling: b must be < m");
  if (b == 0) throw std::invalid_argument("subsampling: b too small");

  const double full = pipeline(data);
  std::size_t n_min = data.marginals.empty() ? 0 : data.n(0);
  for (std::size_t c = 0; c < data.marginals.size(); ++c) n_min = std::min(n_min, data.n(c));

  // Per-column pools of atom indices; partial Fisher-Yates on a pool prefix
  // draws without replacement in O(n_b) per resample.
  std::vector<std::vector<std::uint32_t>> pools(data.marginals.size());
  for (std::size_t c = 0; c < data.marginals.size(); ++c) {
    pools[c].reserve(data.n(c));
    for (std::size_t a = 0; a < data.marginals[c].atoms.size(); ++a)
      for (std::uint64_t t = 0; t < data.marginals[c].counts[a]; ++t)
        pools[c].push_back(static_cast<std::uint32_t>(a));
  }

  std::vector<double> scaled;
  scaled.reserve(cfg.resamples);
  double r_b = 0.0;
  std::vector<std::uint32_t> scratch_coupled, pick;
  for (std::size_t t = 0; t < cfg.resamples; ++t) {
    Rng rng(derive_seed(cfg.seed, t));
    DataSet sub;
    scratch_coupled.clear();
    rng.sample_without_replacement(m, b, scratch_coupled, pick);
    std::sort(pick.begin(), pick.end());
    sub.coupled_rows.reserve(b);
    for (auto idx : pick) sub.coupled_rows.push_back(data.coupled_rows[idx]);

    std::size_t nb_min = 0;
    sub.marginals.resize(data.marginals.size());
    for (std::size_t c = 0; c < data.marginals.size(); ++c) {
      const std::size_t n = data.n(c);
      const std::size_t nb = std::min<std::size_t>(
          n, static_cast<std::size_t>(
                 std::ceil(static_cast<double>(n) * static_cast<double>(b) /
                           static_cast<double>(m))));
      auto& pool = pools[c];
      for (std::size_t i = 0; i < nb; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pool[i], pool[j]);
      }
      std::vector<std::uint64_t> counts(data.marginals[c].atoms.size(), 0);
      for (std::size_t i = 0; i < nb; ++i) ++counts[pool[i]];
      sub.marginals[c] =
          MarginalColumn::from_counts(data.marginals[c].atoms, std::move(counts));
      nb_min = (c == 0) ? nb : std::min(nb_min, nb);
    }
    const double nb_d = static_cast<double>(nb_min);
    const double b_d = static_cast<double>(b);
    r_b = std::sqrt(nb_d * b_d / (nb_d + b_d));

    double stat;
    try {
      stat = pipeline(sub);
    } catch (const UndefinedFunctional&) {
      throw std::runtime_error("subsampling: b too small to evaluate the functional");
    }
    scaled.push_back(r_b * (stat - full));
  }

  const double n_d = static_cast<double>(n_min);
  const double m_d = static_cast<double>(m);
  const double r_m = std::sqrt(n_d * m_d / (n_d + m_d));

  IntervalResult out;
  out.estimate = full;
  out.lo = full - detail::quantile(scaled, 1.0 - cfg.alpha / 2.0) / r_m;
  out.hi = full - detail::quantile(scaled, cfg.alpha / 2.0) / r_m;
  out.alpha = cfg.alpha;
  out.method = "subsampling";
  out.resamples = cfg.resamples;
  out.subsample_size = b;
  out.seed = cfg.seed;
  return out;
}

// ---------------------------------------------------------------------------
// Repeated K-fold cross-validation for the entropic parameter. For each
// repetition and fold, the fold complement plays the coupled dataset and the
// held-out fold's per-coordinate empiricals play the marginal dataset; the
// fold is then scored by the average transport cost from the estimate to the
// held-out points, using the product metric d_{Z,p}. (With the separable
// p-th-power cost the score would collapse onto the estimate's marginals,
// which the construction pins to the fold empiricals, and the selector would
// carry no signal.)
struct CvConfig {
  std::vector<double> etas;  // candidate set
  std::size_t folds = 5;
  std::size_t reps = 10;
  std::uint64_t seed = 0;
  double sinkhorn_tol = 1e-9;
  std::size_t sinkhorn_max_iter = 200000;
  std::size_t grid_cap = 1 << 22;
};

struct CvResult {
  double eta_cv = 0.0;
  std::vector<double> etas;       // ascending
  std::vector<double> avg_costs;  // aligned with etas
};

inline CvResult cv_select_eta(const std::vector<Point>& rows, const CostSpec& cost,
                              const CvConfig& cfg) {
  if (cfg.etas.empty()) throw std::invalid_argument("cv: empty candidate set");
  if (cfg.folds < 2) throw std::invalid_argument("cv: need at least 2 folds");
  if (cfg.reps < 1) throw std::invalid_argument("cv: need at least 1 repetition");
  if (rows.size() < cfg.folds) throw std::invalid_argument("cv: m < number of folds");
  const std::size_t m = rows.size();
  const std::size_t k = cost.num_coords();
  for (const auto& r : rows)
    if (r.size() != k) throw std::invalid_argument("cv: row arity mismatch");

  // Candidates solved largest-first so each Sinkhorn warm-starts the next.
  std::vector<double> etas_desc = cfg.etas;
  std::sort(etas_desc.begin(), etas_desc.end(), std::greater<>());
  etas_desc.erase(std::unique(etas_desc.begin(), etas_desc.end()), etas_desc.end());
  std::vector<double> total_cost(etas_desc.size(), 0.0);

  for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
    Rng rng(derive_seed(cfg.seed, rep));
    std::vector<std::uint32_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = m; i > 1; --i)
      std::swap(perm[i - 1], perm[rng.below(i)]);

    for (std::size_t fold = 0; fold < cfg.folds; ++fold) {
      std::vector<Point> train, test;
      for (std::size_t i = 0; i < m; ++i) {
        if (i % cfg.folds == fold)
          test.push_back(rows[perm[i]]);
        else
          train.push_back(rows[perm[i]]);
      }
      if (test.empty() || train.empty())
        throw std::runtime_error("cv: fold produced an empty measure");

      const JointMeasure coupled = JointMeasure::from_rows(train);
      std::vector<DiscreteMeasure> fold_marginals;
      std::vector<DiscreteMeasure> nus;
      for (std::size_t c = 0; c < k; ++c) {
        std::vector<Point> colpts;
        colpts.reserve(test.size());
        for (const auto& row : test) colpts.push_back({row[c]});
        fold_marginals.push_back(DiscreteMeasure::from_samples(colpts));
        nus.push_back(marginalize(coupled, c));
      }

      // Grid over the product of fold supports plus the average-distance
      // profile D[cell]; both are eta-independent.
      std::size_t grid = 1;
      std::vector<std::size_t> sizes(k);
      for (std::size_t c = 0; c < k; ++c) {
        sizes[c] = fold_marginals[c].size();
        grid *= sizes[c];
      }
      if (grid > cfg.grid_cap) throw std::runtime_error("cv: evaluation grid exceeds cap");
      std::vector<double> dist_profile(grid, 0.0);
      {
        std::vector<std::size_t> levels(k, 0);
        Point cell_atom(k, 0.0);
        for (std::size_t cell = 0; cell < grid; ++cell) {
          std::size_t rest = cell;
          for (std::size_t c = k; c-- > 0;) {
            levels[c] = rest % sizes[c];
            rest /= sizes[c];
          }
          for (std::size_t c = 0; c < k; ++c)
            cell_atom[c] = fold_marginals[c].atoms()[levels[c]][0];
          double s = 0.0;
          std::vector<std::size_t> dims(k, 1);
          for (const auto& t : test) s += cost.product_cost(cell_atom, t, dims);
          dist_profile[cell] = s / static_cast<double>(test.size());
        }
      }

      std::vector<std::vector<double>> warm_f(k), warm_g(k);
      std::vector<double> pihat(grid);
      for (std::size_t e = 0; e < etas_desc.size(); ++e) {
        // Per-coordinate entropic plans, disintegrated over the coupled side.
        std::vector<std::vector<double>> cond(k);  // dense |mu| x |nu|, col-major free
        std::vector<std::vector<std::uint32_t>> to_nu(k);
        for (std::size_t c = 0; c < k; ++c) {
          SinkhornOptions opt;
          opt.tol = cfg.sinkhorn_tol;
          opt.max_iter = cfg.sinkhorn_max_iter;
          opt.adaptive_overrelax = true;
          if (!warm_f[c].empty()) {
            opt.f0 = &warm_f[c];
            opt.g0 = &warm_g[c];
          }
          EntropicPlan plan =
              sinkhorn(fold_marginals[c], nus[c], cost.coord(c), cost.p(), etas_desc[e], opt);
          warm_f[c] = plan.f;
          warm_g[c] = plan.g;
          const std::size_t rr = plan.rows(), cc = plan.cols();
          std::vector<double> colmass = plan.col_sums();
          cond[c].assign(rr * cc, 0.0);
          for (std::size_t a = 0; a < rr; ++a)
            for (std::size_t z = 0; z < cc; ++z)
              cond[c][a * cc + z] = plan.matrix[a * cc + z] / colmass[z];
          to_nu[c].resize(coupled.size());
          for (std::size_t j = 0; j < coupled.size(); ++j) {
            const std::size_t idx = nus[c].find(coupled.block_point(j, c));
            to_nu[c][j] = static_cast<std::uint32_t>(idx);
          }
        }

        std::fill(pihat.begin(), pihat.end(), 0.0);
        std::vector<std::size_t> levels(k, 0);
        for (std::size_t j = 0; j < coupled.size(); ++j) {
          const double wj = coupled.weights()[j];
          std::fill(levels.begin(), levels.end(), 0);
          for (;;) {
            double w = wj;
            std::size_t cell = 0;
            for (std::size_t c = 0; c < k; ++c) {
              w *= cond[c][levels[c] * nus[c].size() + to_nu[c][j]];
              cell = cell * sizes[c] + levels[c];
            }
            pihat[cell] += w;
            std::size_t d = k;
            while (d-- > 0) {
              if (++levels[d] < sizes[d]) break;
              levels[d] = 0;
            }
            if (d == static_cast<std::size_t>(-1)) break;
          }
        }

        double score = 0.0;
        for (std::size_t cell = 0; cell < grid; ++cell)
          score += pihat[cell] * dist_profile[cell];
        total_cost[e] += score;
      }
    }
  }

  CvResult out;
  out.etas.assign(etas_desc.rbegin(), etas_desc.rend());  // ascending
  out.avg_costs.resize(etas_desc.size());
  for (std::size_t e = 0; e < etas_desc.size(); ++e)
    out.avg_costs[etas_desc.size() - 1 - e] =
        total_cost[e] / static_cast<double>(cfg.reps);
  // Smallest eta among exact minimizers.
  std::size_t best = 0;
  for (std::size_t e = 1; e < out.etas.size(); ++e)
    if (out.avg_costs[e] < out.avg_costs[best]) best = e;
  out.eta_cv = out.etas[best];
  return out;
}

}  // namespace otproj
