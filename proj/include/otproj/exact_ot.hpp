#pragma once

// Exact discrete optimal transport. The workhorse is a transportation
// network simplex (northwest-corner start, Bland's rule, lexicographic
// tie-breaks) that returns a deterministic vertex of the transportation
// polytope. One-dimensional coordinates with |x-z|^p costs take the
// monotone-rearrangement shortcut, which is exact for convex ground costs
// and keeps large empirical marginals tractable. A brute-force multimarginal
// LP over the vectorized program serves as the oracle for the shadow
// construction on small instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "otproj/finite_lp.hpp"
#include "otproj/measures.hpp"

namespace otproj {

struct PlanEntry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double mass = 0.0;
};

struct TransportPlan {
  DiscreteMeasure row_measure;
  DiscreteMeasure col_measure;
  std::vector<PlanEntry> entries;  // sorted by (row, col)
  double objective = 0.0;          // sum mass * d(x,z)^p

  double wasserstein(double p) const { return std::pow(objective, 1.0 / p); }

  std::vector<double> row_sums() const {
    std::vector<double> s(row_measure.size(), 0.0);
    for (const auto& e : entries) s[e.row] += e.mass;
    return s;
  }
  std::vector<double> col_sums() const {
    std::vector<double> s(col_measure.size(), 0.0);
    for (const auto& e : entries) s[e.col] += e.mass;
    return s;
  }
};

enum class OtMethod { Auto, NetworkSimplex, Monotone };

namespace detail {

// Transportation simplex over a dense cost matrix (row-major R x C).
class TransportSimplex {
 public:
  TransportSimplex(const std::vector<double>& supply, const std::vector<double>& demand,
                   const std::vector<double>& cost)
      : r_(supply.size()), c_(demand.size()), supply_(supply), demand_(demand),
        cost_(cost) {
    double sa = 0.0, sb = 0.0;
    for (double v : supply_) sa += v;
    for (double v : demand_) sb += v;
    if (std::abs(sa - sb) > 1e-9)
      throw std::invalid_argument("transport: mass imbalance beyond 1e-9");
    double max_abs = 0.0;
    for (double v : cost_) max_abs = std::max(max_abs, std::abs(v));
    eps_ = 1e-12 * (1.0 + max_abs);
  }

  // Returns arcs (i, j, flow) of the optimal vertex plus the objective.
  void solve(std::vector<PlanEntry>& out, double& objective) {
    northwest_corner();
    const std::size_t nodes = r_ + c_;
    std::vector<double> u(r_), v(c_);
    std::vector<int> parent_arc(nodes);
    std::vector<std::size_t> order(nodes);

    for (std::size_t iter = 0;; ++iter) {
      if (iter > 100000 * (r_ + c_))
        throw std::runtime_error("transport: pivot limit exceeded");
      compute_duals(u, v);

      // Bland: first cell in (row, col) order with negative reduced cost.
      std::size_t ei = r_, ej = c_;
      bool found = false;
      for (std::size_t i = 0; i < r_ && !found; ++i) {
        const double* crow = &cost_[i * c_];
        for (std::size_t j = 0; j < c_; ++j) {
          if (crow[j] - u[i] - v[j] < -eps_) {
            ei = i;
            ej = j;
            found = true;
            break;
          }
        }
      }
      if (!found) break;
      pivot(ei, ej, parent_arc, order);
    }

    out.clear();
    objective = 0.0;
    for (const Arc& a : arcs_) {
      if (!a.alive) continue;
      if (a.flow > 0.0) {
        out.push_back({static_cast<std::uint32_t>(a.i), static_cast<std::uint32_t>(a.j),
                       a.flow});
        objective += a.flow * cost_[a.i * c_ + a.j];
      }
    }
    std::sort(out.begin(), out.end(), [](const PlanEntry& x, const PlanEntry& y) {
      return x.row != y.row ? x.row < y.row : x.col < y.col;
    });
  }

 private:
  struct Arc {
    std::size_t i, j;
    double flow;
    bool alive;
  };

  void northwest_corner() {
    std::vector<double> a = supply_, b = demand_;
    arcs_.clear();
    arcs_.reserve(r_ + c_ - 1);
    std::size_t i = 0, j = 0;
    for (;;) {
      const double x = std::min(a[i], b[j]);
      arcs_.push_back({i, j, x, true});
      a[i] -= x;
      b[j] -= x;
      if (i == r_ - 1 && j == c_ - 1) break;
      if (a[i] <= b[j] && i + 1 < r_)
        ++i;
      else
        ++j;
    }
    rebuild_adjacency();
  }

  void rebuild_adjacency() {
    adj_.assign(r_ + c_, {});
    for (std::size_t t = 0; t < arcs_.size(); ++t) {
      if (!arcs_[t].alive) continue;
      adj_[arcs_[t].i].push_back(t);
      adj_[r_ + arcs_[t].j].push_back(t);
    }
  }

  void compute_duals(std::vector<double>& u, std::vector<double>& v) {
    const std::size_t nodes = r_ + c_;
    std::vector<char> seen(nodes, 0);
    std::vector<std::size_t> stack;
    stack.push_back(0);
    seen[0] = 1;
    u[0] = 0.0;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t t : adj_[node]) {
        const Arc& a = arcs_[t];
        const std::size_t other = (node < r_) ? r_ + a.j : a.i;
        if (seen[other]) continue;
        seen[other] = 1;
        if (other >= r_)
          v[other - r_] = cost_[a.i * c_ + a.j] - u[a.i];
        else
          u[other] = cost_[a.i * c_ + a.j] - v[node - r_];
        stack.push_back(other);
      }
    }
    for (char s : seen)
      if (!s) throw std::runtime_error("transport: basis tree disconnected");
  }

  // Unique tree path from row node ei to col node ej; entering arc closes
  // the cycle with +theta, path arcs alternate starting with -theta at ej.
  void pivot(std::size_t ei, std::size_t ej, std::vector<int>& parent_arc,
             std::vector<std::size_t>& order) {
    const std::size_t nodes = r_ + c_;
    parent_arc.assign(nodes, -1);
    std::vector<char> seen(nodes, 0);
    order.clear();
    order.push_back(ei);
    seen[ei] = 1;
    for (std::size_t head = 0; head < order.size(); ++head) {
      const std::size_t node = order[head];
      if (node == r_ + ej) break;
      for (std::size_t t : adj_[node]) {
        const Arc& a = arcs_[t];
        const std::size_t other = (node < r_) ? r_ + a.j : a.i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_arc[other] = static_cast<int>(t);
        order.push_back(other);
      }
    }
    if (!seen[r_ + ej]) throw std::runtime_error("transport: cycle not found");

    // Walk back from ej to ei collecting the cycle's basic arcs.
    std::vector<std::size_t> path;
    std::size_t node = r_ + ej;
    while (node != ei) {
      const int t = parent_arc[node];
      path.push_back(static_cast<std::size_t>(t));
      const Arc& a = arcs_[static_cast<std::size_t>(t)];
      node = (node == a.i) ? r_ + a.j : a.i;
    }

    // Signs along the cycle: position 0 (nearest ej) is -, then alternating.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = arcs_.size();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Arc& a = arcs_[path[k]];
      if (a.flow < theta - 1e-15 ||
          (a.flow < theta + 1e-15 &&
           (leave == arcs_.size() || std::make_pair(a.i, a.j) <
                                         std::make_pair(arcs_[leave].i, arcs_[leave].j)))) {
        theta = a.flow;
        leave = path[k];
      }
    }
    if (leave == arcs_.size()) throw std::runtime_error("transport: no leaving arc");

    for (std::size_t k = 0; k < path.size(); ++k)
      arcs_[path[k]].flow += (k % 2 == 0) ? -theta : theta;
    arcs_[leave].alive = false;
    arcs_.push_back({ei, ej, theta, true});
    rebuild_adjacency();
  }

  std::size_t r_, c_;
  std::vector<double> supply_, demand_, cost_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<std::size_t>> adj_;
  double eps_ = 1e-12;
};

// Quantile coupling of two sorted 1-D measures; optimal for costs |x-z|^p.
// Works on cumulative breakpoints so sub-ulp weight imbalances cannot stall
// the sweep.
inline void monotone_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                          std::vector<PlanEntry>& out, double& objective) {
  double sa = 0.0, sb = 0.0;
  for (double w : mu.weights()) sa += w;
  for (double w : nu.weights()) sb += w;
  if (std::abs(sa - sb) > 1e-9)
    throw std::invalid_argument("transport: mass imbalance beyond 1e-9");

  std::vector<double> ca(mu.size()), cb(nu.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) ca[i] = (acc += mu.weights()[i]);
  acc = 0.0;
  for (std::size_t j = 0; j < nu.size(); ++j) cb[j] = (acc += nu.weights()[j]);

  out.clear();
  objective = 0.0;
  std::size_t i = 0, j = 0;
  double prev = 0.0;
  while (i < mu.size() && j < nu.size()) {
    const double t = std::min(ca[i], cb[j]);
    const double mass = t - prev;
    if (mass > 0.0) {
      out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), mass});
      objective += mass * std::pow(std::abs(mu.atoms()[i][0] - nu.atoms()[j][0]), p);
    }
    prev = t;
    if (ca[i] <= cb[j])
      ++i;
    else
      ++j;
  }
}

}  // namespace detail

// Exact W_p plan between two measures on the same coordinate space.
inline TransportPlan solve_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 const CoordMetric& metric, double p,
                                 OtMethod method = OtMethod::Auto) {
  if (mu.dim() != nu.dim())
    throw std::invalid_argument("solve_exact: coordinate dimension mismatch");
  if (method == OtMethod::Auto) {
    const bool one_dim_power =
        mu.dim() == 1 &&
        (metric.kind == Metric::AbsDiff || metric.kind == Metric::Euclidean);
    method = one_dim_power ? OtMethod::Monotone : OtMethod::NetworkSimplex;
  }

  TransportPlan plan{mu, nu, {}, 0.0};
  if (method == OtMethod::Monotone) {
    if (mu.dim() != 1) throw std::invalid_argument("monotone solver needs 1-D atoms");
    detail::monotone_plan(mu, nu, p, plan.entries, plan.objective);
    return plan;
  }

  std::vector<double> cost(mu.size() * nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j)
      cost[i * nu.size() + j] = std::pow(metric.distance(mu.atoms()[i], nu.atoms()[j]), p);
  detail::TransportSimplex ts(mu.weights(), nu.weights(), cost);
  ts.solve(plan.entries, plan.objective);
  return plan;
}

// W_p(bmu, bnu) = (sum_i W_p^p(mu^i, nu^i))^(1/p).
inline double wasserstein_vector(const MarginalSystem& a, const MarginalSystem& b,
                                 const CostSpec& cost) {
  if (a.num_coords() != b.num_coords())
    throw std::invalid_argument("wasserstein_vector: K mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < a.num_coords(); ++i) {
    TransportPlan plan = solve_exact(a.coord(i), b.coord(i), cost.coord(i), cost.p());
    total += plan.objective;
  }
  return std::pow(total, 1.0 / cost.p());
}

// W_p between two joint measures under the separable product cost.
inline double exact_joint_wasserstein(const JointMeasure& a, const JointMeasure& b,
                                      const CostSpec& cost, std::size_t cap = 250000) {
  if (a.dims() != b.dims())
    throw std::invalid_argument("exact_joint_wasserstein: product spaces differ");
  if (a.size() * b.size() > cap)
    throw std::runtime_error("exact_joint_wasserstein: instance exceeds cap");
  std::vector<double> c(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      c[i * b.size() + j] = cost.product_cost_pow(a.atoms()[i], b.atoms()[j], a.dims());
  detail::TransportSimplex ts(a.weights(), b.weights(), c);
  std::vector<PlanEntry> entries;
  double objective = 0.0;
  ts.solve(entries, objective);
  return std::pow(objective, 1.0 / cost.p());
}

struct MotSolution {
  FiniteLP lp;
  std::vector<double> gamma;  // optimal coupling over (x-cells) x (joint atoms)
  double value = 0.0;         // W_p value, i.e. optimum^(1/p)
  double objective = 0.0;     // optimum of <c, gamma>
};

// Dense-LP oracle for the projection: min <c,gamma> over Pi(bmu_n, pi0_m).
inline MotSolution mot_bruteforce(const MarginalSystem& marginals, const JointMeasure& joint,
                                  const CostSpec& cost, std::size_t var_cap = 200000) {
  MotSolution sol;
  sol.lp = build_lp(joint, marginals, cost, var_cap);
  LpSolution s = solve_lp(sol.lp);
  sol.gamma = std::move(s.gamma);
  sol.objective = s.value;
  sol.value = std::pow(std::max(0.0, s.value), 1.0 / cost.p());
  return sol;
}

}  // namespace otproj
