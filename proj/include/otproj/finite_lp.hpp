#pragma once

// Vectorized finite-support linear program for the coupling projection:
//   min <c, gamma>  s.t.  A gamma = b,  gamma >= 0,
// with cells (x_1,...,x_K, z) in lexicographic order (z fastest). The raw
// constraint matrix has one redundant row per coordinate block, so the last
// level row of every marginal block is removed; the repaired A has full row
// rank S_+ - K and the rhs carries truncated marginals followed by the joint
// block.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "otproj/measures.hpp"
#include "otproj/simplex.hpp"

namespace otproj {

struct FiniteLP {
  std::vector<std::vector<Point>> marg_atoms;  // per-coordinate supports
  std::vector<Point> joint_atoms;              // s_0 flattened support atoms
  std::vector<std::size_t> dims;               // per-coordinate block dims
  std::vector<std::size_t> s;                  // s_i = |marg support i|
  std::size_t s0 = 0;
  std::size_t num_vars = 0;  // S_* = s_1 * ... * s_K * s_0
  std::size_t num_rows = 0;  // S_+ - K
  std::vector<double> cost;  // length S_*
  std::vector<double> a;     // row-major num_rows x num_vars
  std::vector<double> b;     // truncated marginals, then joint weights

  std::size_t num_coords() const { return s.size(); }

  std::size_t num_x() const {
    std::size_t n = 1;
    for (std::size_t si : s) n *= si;
    return n;
  }

  std::size_t x_index(const std::vector<std::size_t>& levels) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < s.size(); ++i) idx = idx * s[i] + levels[i];
    return idx;
  }

  std::size_t cell_index(const std::vector<std::size_t>& levels, std::size_t z) const {
    return x_index(levels) * s0 + z;
  }

  void decode(std::size_t cell, std::vector<std::size_t>& levels, std::size_t& z) const {
    z = cell % s0;
    std::size_t xi = cell / s0;
    levels.assign(s.size(), 0);
    for (std::size_t i = s.size(); i-- > 0;) {
      levels[i] = xi % s[i];
      xi /= s[i];
    }
  }

  // Flattened product-space atom for x-cell `xi`.
  Point x_atom(std::size_t xi) const {
    std::vector<std::size_t> levels(s.size());
    for (std::size_t i = s.size(); i-- > 0;) {
      levels[i] = xi % s[i];
      xi /= s[i];
    }
    Point p;
    for (std::size_t i = 0; i < s.size(); ++i)
      p.insert(p.end(), marg_atoms[i][levels[i]].begin(), marg_atoms[i][levels[i]].end());
    return p;
  }

  std::vector<Point> x_atoms() const {
    std::vector<Point> out;
    out.reserve(num_x());
    for (std::size_t xi = 0; xi < num_x(); ++xi) out.push_back(x_atom(xi));
    return out;
  }

  // Pushforward of a cell vector onto the x block.
  std::vector<double> x_pushforward(const std::vector<double>& gamma) const {
    if (gamma.size() != num_vars)
      throw std::invalid_argument("x_pushforward: size mismatch");
    std::vector<double> out(num_x(), 0.0);
    for (std::size_t xi = 0; xi < out.size(); ++xi) {
      double t = 0.0;
      const double* g = gamma.data() + xi * s0;
      for (std::size_t z = 0; z < s0; ++z) t += g[z];
      out[xi] = t;
    }
    return out;
  }

  // x-cell of the product point equal to joint atom z, or npos when some
  // block of z lies outside the corresponding marginal support.
  std::size_t diagonal_x_cell(std::size_t z) const {
    std::size_t xi = 0;
    std::size_t off = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Point blockpt(joint_atoms[z].begin() + off,
                          joint_atoms[z].begin() + off + dims[i]);
      std::size_t level = static_cast<std::size_t>(-1);
      for (std::size_t a = 0; a < marg_atoms[i].size(); ++a) {
        if (marg_atoms[i][a] == blockpt) {
          level = a;
          break;
        }
      }
      if (level == static_cast<std::size_t>(-1)) return npos;
      xi = xi * s[i] + level;
      off += dims[i];
    }
    return xi;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

inline FiniteLP build_lp(const JointMeasure& pi0_m, const MarginalSystem& marginals,
                         const CostSpec& cost, std::size_t var_cap = 200000) {
  marginals.check_conformable(pi0_m);
  if (cost.num_coords() != marginals.num_coords())
    throw std::invalid_argument("build_lp: cost K mismatch");

  FiniteLP lp;
  lp.dims = pi0_m.dims();
  const std::size_t k = marginals.num_coords();
  lp.marg_atoms.resize(k);
  lp.s.resize(k);
  std::size_t sx = 1;
  for (std::size_t i = 0; i < k; ++i) {
    lp.marg_atoms[i] = marginals.coord(i).atoms();
    lp.s[i] = lp.marg_atoms[i].size();
    sx *= lp.s[i];
  }
  lp.joint_atoms = pi0_m.atoms();
  lp.s0 = lp.joint_atoms.size();
  lp.num_vars = sx * lp.s0;
  if (lp.num_vars > var_cap)
    throw std::runtime_error("build_lp: " + std::to_string(lp.num_vars) +
                             " variables exceed cap " + std::to_string(var_cap));

  std::size_t rows = lp.s0;
  for (std::size_t si : lp.s) rows += si - 1;
  lp.num_rows = rows;

  // Cost tensor d_{Z,p}^p, cells in (x_1,...,x_K,z) order with z fastest.
  lp.cost.assign(lp.num_vars, 0.0);
  {
    std::vector<std::size_t> levels(k, 0);
    for (std::size_t xi = 0; xi < sx; ++xi) {
      std::size_t rest = xi;
      for (std::size_t i = k; i-- > 0;) {
        levels[i] = rest % lp.s[i];
        rest /= lp.s[i];
      }
      std::vector<double> partial(lp.s0, 0.0);
      std::size_t off = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const Point& xa = lp.marg_atoms[i][levels[i]];
        for (std::size_t z = 0; z < lp.s0; ++z) {
          std::span<const double> zb(lp.joint_atoms[z].data() + off, lp.dims[i]);
          partial[z] += cost.ground_pow(i, xa, zb);
        }
        off += lp.dims[i];
      }
      for (std::size_t z = 0; z < lp.s0; ++z) lp.cost[xi * lp.s0 + z] = partial[z];
    }
  }

  lp.a.assign(lp.num_rows * lp.num_vars, 0.0);
  lp.b.assign(lp.num_rows, 0.0);
  std::size_t row0 = 0;
  for (std::size_t i = 0; i < k; ++i) {
    // Rows for coordinate i, levels 0..s_i-2 (last level removed).
    std::size_t stride_after = lp.s0;
    for (std::size_t j = i + 1; j < k; ++j) stride_after *= lp.s[j];
    std::size_t blocks_before = 1;
    for (std::size_t j = 0; j < i; ++j) blocks_before *= lp.s[j];
    for (std::size_t level = 0; level + 1 < lp.s[i]; ++level) {
      double* row = &lp.a[(row0 + level) * lp.num_vars];
      for (std::size_t blk = 0; blk < blocks_before; ++blk) {
        std::size_t base = (blk * lp.s[i] + level) * stride_after;
        for (std::size_t t = 0; t < stride_after; ++t) row[base + t] = 1.0;
      }
      lp.b[row0 + level] = marginals.coord(i).weights()[level];
    }
    row0 += lp.s[i] - 1;
  }
  for (std::size_t z = 0; z < lp.s0; ++z) {
    double* row = &lp.a[(row0 + z) * lp.num_vars];
    for (std::size_t xi = 0; xi < sx; ++xi) row[xi * lp.s0 + z] = 1.0;
    lp.b[row0 + z] = pi0_m.weights()[z];
  }
  return lp;
}

struct LpSolution {
  std::vector<double> gamma;
  std::vector<std::size_t> basis;  // cell index per constraint row
  double value = 0.0;
};

inline LpSolution solve_lp(const FiniteLP& lp) {
  LpResult r = solve_dense_lp(lp.a, lp.num_rows, lp.num_vars, lp.b, lp.cost);
  if (r.status == LpStatus::Infeasible)
    throw std::runtime_error("solve_lp: infeasible (probability inputs cannot be)");
  if (r.status == LpStatus::Unbounded)
    throw std::runtime_error("solve_lp: unbounded (cost tensor corrupted)");
  for (std::size_t idx : r.basis)
    if (idx >= lp.num_vars)
      throw std::runtime_error("solve_lp: rank-deficient constraints after repair");
  LpSolution s;
  s.gamma = std::move(r.x);
  s.basis = std::move(r.basis);
  s.value = r.value;
  return s;
}

}  // namespace otproj
