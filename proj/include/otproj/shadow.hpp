#pragma once

// The shadow estimator. Per-coordinate transport plans between the marginal
// data and the coupled data's marginals are disintegrated over the coupled
// side; the estimate is the mixture, across coupled atoms, of the product of
// the conditional kernels. Entropic mode swaps Sinkhorn plans in for the
// exact ones. Kernels stay in factored form so functionals of the estimate
// can be evaluated without materializing the (possibly dense) product
// support; materialization is available behind a cap.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "otproj/entropic_ot.hpp"
#include "otproj/exact_ot.hpp"
#include "otproj/measures.hpp"

namespace otproj {

struct DisintegrationKernel {
  DiscreteMeasure mu;  // support of the conditionals
  DiscreteMeasure nu;  // conditioning atoms
  // conditionals[z] lists (mu atom index, probability), sorted by index.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> conditionals;
};

// kappa(x|z) = gamma[x,z] / colmass(z), conditioning on the column side.
inline DisintegrationKernel disintegrate(const TransportPlan& plan) {
  DisintegrationKernel k{plan.row_measure, plan.col_measure, {}};
  k.conditionals.assign(plan.col_measure.size(), {});
  std::vector<double> colmass(plan.col_measure.size(), 0.0);
  for (const auto& e : plan.entries) colmass[e.col] += e.mass;
  for (std::size_t z = 0; z < colmass.size(); ++z)
    if (!(colmass[z] > 0.0))
      throw std::runtime_error("disintegrate: zero column mass (corrupted plan)");
  for (const auto& e : plan.entries)
    k.conditionals[e.col].push_back({e.row, e.mass / colmass[e.col]});
  return k;
}

inline DisintegrationKernel disintegrate(const EntropicPlan& plan) {
  DisintegrationKernel k{plan.row_measure, plan.col_measure, {}};
  const std::size_t r = plan.rows(), c = plan.cols();
  k.conditionals.assign(c, {});
  std::vector<double> colmass = plan.col_sums();
  for (std::size_t z = 0; z < c; ++z) {
    if (!(colmass[z] > 0.0))
      throw std::runtime_error("disintegrate: zero column mass (corrupted plan)");
    auto& cond = k.conditionals[z];
    cond.reserve(r);
    for (std::size_t a = 0; a < r; ++a)
      cond.push_back({static_cast<std::uint32_t>(a), plan.matrix[a * c + z] / colmass[z]});
  }
  return k;
}

enum class ProjectionMode { Exact, Entropic };

class ProjectionResult {
 public:
  ProjectionResult(JointMeasure coupled, std::vector<DisintegrationKernel> kernels,
                   std::vector<double> transport_costs, std::vector<double> kl_terms,
                   double p, ProjectionMode mode, double eta)
      : coupled_(std::move(coupled)), kernels_(std::move(kernels)),
        transport_costs_(std::move(transport_costs)), kl_terms_(std::move(kl_terms)),
        p_(p), mode_(mode), eta_(eta) {
    const std::size_t k = kernels_.size();
    atom_to_nu_.assign(k, std::vector<std::uint32_t>(coupled_.size()));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < coupled_.size(); ++j) {
        const std::size_t idx = kernels_[i].nu.find(coupled_.block_point(j, i));
        if (idx == DiscreteMeasure::npos)
          throw std::logic_error("projection: coupled atom missing from kernel support");
        atom_to_nu_[i][j] = static_cast<std::uint32_t>(idx);
      }
    }
    double total = 0.0;
    for (double t : transport_costs_) total += t;
    value_ = std::pow(std::max(0.0, total), 1.0 / p_);
  }

  const JointMeasure& coupled() const { return coupled_; }
  const std::vector<DisintegrationKernel>& kernels() const { return kernels_; }
  std::size_t num_coords() const { return kernels_.size(); }
  ProjectionMode mode() const { return mode_; }
  double eta() const { return eta_; }
  double p() const { return p_; }

  // Projection value: W_p(bmu_n, bnu_m) in exact mode, the unregularized
  // objective's p-th root in entropic mode.
  double value() const { return value_; }

  double transport_cost(std::size_t i) const { return transport_costs_.at(i); }
  double kl_term(std::size_t i) const { return kl_terms_.at(i); }

  // Full entropic objective sum_i ( <d^p, gamma^i> + eta KL_i ).
  double regularized_objective() const {
    double s = 0.0;
    for (std::size_t i = 0; i < transport_costs_.size(); ++i)
      s += transport_costs_[i] + eta_ * kl_terms_[i];
    return s;
  }

  // Mixture marginal on coordinate i; equals the target marginal up to the
  // per-coordinate solver tolerance.
  DiscreteMeasure marginal(std::size_t i) const {
    const auto& ker = kernels_.at(i);
    std::vector<double> w(ker.mu.size(), 0.0);
    for (std::size_t j = 0; j < coupled_.size(); ++j) {
      const double wj = coupled_.weights()[j];
      for (const auto& [a, q] : ker.conditionals[atom_to_nu_[i][j]]) w[a] += wj * q;
    }
    return DiscreteMeasure(ker.mu.atoms(), std::move(w));
  }

  // Integral of a product integrand prod_i f_i(x_i) against the estimate.
  double expect_product(
      const std::vector<std::function<double(std::span<const double>)>>& fs) const {
    if (fs.size() != kernels_.size())
      throw std::invalid_argument("expect_product: K mismatch");
    std::vector<std::vector<double>> cond_means(kernels_.size());
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
      const auto& ker = kernels_[i];
      std::vector<double> fv(ker.mu.size());
      for (std::size_t a = 0; a < ker.mu.size(); ++a) fv[a] = fs[i](ker.mu.atoms()[a]);
      cond_means[i].assign(ker.nu.size(), 0.0);
      for (std::size_t z = 0; z < ker.nu.size(); ++z)
        for (const auto& [a, q] : ker.conditionals[z]) cond_means[i][z] += fv[a] * q;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < coupled_.size(); ++j) {
      double prod = coupled_.weights()[j];
      for (std::size_t i = 0; i < kernels_.size(); ++i)
        prod *= cond_means[i][atom_to_nu_[i][j]];
      total += prod;
    }
    return total;
  }

  // Number of product-support atoms the mixture enumerates before dedup.
  std::size_t enumeration_size() const {
    std::size_t total = 0;
    for (std::size_t j = 0; j < coupled_.size(); ++j) {
      std::size_t prod = 1;
      for (std::size_t i = 0; i < kernels_.size(); ++i)
        prod *= kernels_[i].conditionals[atom_to_nu_[i][j]].size();
      total += prod;
    }
    return total;
  }

  // Assembles the estimate as an explicit joint measure. Atoms are merged by
  // exact equality; a positive prune floor drops light atoms at export and
  // renormalizes.
  JointMeasure materialize(double prune_floor = 0.0, std::size_t atom_cap = 2000000) const {
    if (enumeration_size() > atom_cap)
      throw std::runtime_error("materialize: product support exceeds cap; prune or "
                               "evaluate functionals in factored form");
    std::vector<std::size_t> dims(kernels_.size());
    std::size_t flat = 0;
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
      dims[i] = kernels_[i].mu.dim();
      flat += dims[i];
    }
    std::vector<Point> atoms;
    std::vector<double> weights;
    std::vector<std::size_t> pick(kernels_.size());
    for (std::size_t j = 0; j < coupled_.size(); ++j) {
      const double wj = coupled_.weights()[j];
      std::vector<const std::vector<std::pair<std::uint32_t, double>>*> lists;
      lists.reserve(kernels_.size());
      bool empty = false;
      for (std::size_t i = 0; i < kernels_.size(); ++i) {
        lists.push_back(&kernels_[i].conditionals[atom_to_nu_[i][j]]);
        if (lists.back()->empty()) empty = true;
      }
      if (empty) continue;
      std::fill(pick.begin(), pick.end(), 0);
      for (;;) {
        double w = wj;
        Point atom;
        atom.reserve(flat);
        for (std::size_t i = 0; i < kernels_.size(); ++i) {
          const auto& [a, q] = (*lists[i])[pick[i]];
          w *= q;
          const Point& pa = kernels_[i].mu.atoms()[a];
          atom.insert(atom.end(), pa.begin(), pa.end());
        }
        atoms.push_back(std::move(atom));
        weights.push_back(w);
        std::size_t d = kernels_.size();
        while (d-- > 0) {
          if (++pick[d] < lists[d]->size()) break;
          pick[d] = 0;
        }
        if (d == static_cast<std::size_t>(-1)) break;
      }
    }
    JointMeasure out(dims, std::move(atoms), std::move(weights));
    if (prune_floor > 0.0) out = out.pruned(prune_floor);
    return out;
  }

 private:
  JointMeasure coupled_;
  std::vector<DisintegrationKernel> kernels_;
  std::vector<std::vector<std::uint32_t>> atom_to_nu_;
  std::vector<double> transport_costs_, kl_terms_;
  double p_;
  ProjectionMode mode_;
  double eta_ = 0.0;
  double value_ = 0.0;
};

inline ProjectionResult shadow_project(const JointMeasure& pi0_m,
                                       const MarginalSystem& marginals,
                                       const CostSpec& cost,
                                       OtMethod method = OtMethod::Auto) {
  marginals.check_conformable(pi0_m);
  const std::size_t k = marginals.num_coords();
  std::vector<DisintegrationKernel> kernels;
  std::vector<double> costs(k, 0.0), kls(k, 0.0);
  kernels.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    DiscreteMeasure nu = marginalize(pi0_m, i);
    TransportPlan plan = solve_exact(marginals.coord(i), nu, cost.coord(i), cost.p(), method);
    costs[i] = plan.objective;
    kernels.push_back(disintegrate(plan));
  }
  return ProjectionResult(pi0_m, std::move(kernels), std::move(costs), std::move(kls),
                          cost.p(), ProjectionMode::Exact, 0.0);
}

inline ProjectionResult entropic_shadow_project(const JointMeasure& pi0_m,
                                                const MarginalSystem& marginals,
                                                const CostSpec& cost, double eta,
                                                const SinkhornOptions& opt = {}) {
  if (!(eta > 0.0)) throw std::invalid_argument("entropic shadow: eta must be > 0");
  marginals.check_conformable(pi0_m);
  const std::size_t k = marginals.num_coords();
  std::vector<DisintegrationKernel> kernels;
  std::vector<double> costs(k, 0.0), kls(k, 0.0);
  kernels.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    DiscreteMeasure nu = marginalize(pi0_m, i);
    EntropicPlan plan = sinkhorn(marginals.coord(i), nu, cost.coord(i), cost.p(), eta, opt);
    costs[i] = plan.transport_cost();
    kls[i] = plan.kl_term();
    kernels.push_back(disintegrate(plan));
  }
  return ProjectionResult(pi0_m, std::move(kernels), std::move(costs), std::move(kls),
                          cost.p(), ProjectionMode::Entropic, eta);
}

struct StabilityBounds {
  double lower = 0.0;   // W_p(bmu, bmu_n)
  double middle = 0.0;  // W_p(pi_hat, pi0)
  double upper = 0.0;   // W_p(bmu_n, bnu_m) + W_p(pi0_m, pi0)
};

inline StabilityBounds stability_bounds(const JointMeasure& pi0, const JointMeasure& pi0_m,
                                        const MarginalSystem& marginals_true,
                                        const MarginalSystem& marginals_n,
                                        const CostSpec& cost) {
  StabilityBounds out;
  out.lower = wasserstein_vector(marginals_true, marginals_n, cost);
  ProjectionResult proj = shadow_project(pi0_m, marginals_n, cost);
  out.middle = exact_joint_wasserstein(proj.materialize(), pi0, cost);
  out.upper = wasserstein_vector(marginals_n, MarginalSystem::of_joint(pi0_m), cost) +
              exact_joint_wasserstein(pi0_m, pi0, cost);
  return out;
}

}  // namespace otproj
