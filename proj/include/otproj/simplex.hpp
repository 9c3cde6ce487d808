#pragma once

// Dense two-phase primal simplex for  min <c,x>  s.t.  Ax = b, x >= 0.
// Bland's rule (lowest-index entering column, lowest basic-variable index
// among minimum-ratio ties) keeps pivoting deterministic and cycle-free.
// Artificial columns never re-enter once they leave the basis.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace otproj {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Optimal;
  double value = 0.0;
  std::vector<double> x;
  std::vector<std::size_t> basis;  // basic variable index per row
};

class DenseSimplex {
 public:
  // A row-major, m rows by n cols.
  DenseSimplex(std::vector<double> a, std::size_t rows, std::size_t cols,
               std::vector<double> b, std::vector<double> c)
      : m_(rows), n_(cols), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    if (a_.size() != m_ * n_ || b_.size() != m_ || c_.size() != n_)
      throw std::invalid_argument("simplex: shape mismatch");
  }

  LpResult solve() {
    for (std::size_t i = 0; i < m_; ++i) {
      if (b_[i] < 0.0) {
        b_[i] = -b_[i];
        for (std::size_t j = 0; j < n_; ++j) a_[i * n_ + j] = -a_[i * n_ + j];
      }
    }

    cols_ = n_ + m_;  // structural + artificial
    tableau_.assign(m_ * cols_, 0.0);
    rhs_ = b_;
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) tableau_[i * cols_ + j] = a_[i * n_ + j];
      tableau_[i * cols_ + n_ + i] = 1.0;
      basis_[i] = n_ + i;
    }

    // Phase 1: minimize the sum of artificials.
    std::vector<double> phase1_cost(cols_, 0.0);
    for (std::size_t j = n_; j < cols_; ++j) phase1_cost[j] = 1.0;
    build_objective(phase1_cost);
    run_pivots();
    if (objective_ > kFeasTol) {
      LpResult r;
      r.status = LpStatus::Infeasible;
      return r;
    }
    drive_out_artificials();

    // Phase 2.
    std::vector<double> cost(cols_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) cost[j] = c_[j];
    build_objective(cost);
    const bool bounded = run_pivots();

    LpResult r;
    if (!bounded) {
      r.status = LpStatus::Unbounded;
      return r;
    }
    r.status = LpStatus::Optimal;
    r.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) r.x[basis_[i]] = rhs_[i];
    r.value = 0.0;
    for (std::size_t j = 0; j < n_; ++j) r.value += c_[j] * r.x[j];
    r.basis = basis_;
    return r;
  }

 private:
  static constexpr double kFeasTol = 1e-8;
  static constexpr double kPivotTol = 1e-11;
  static constexpr double kReducedTol = 1e-9;

  void build_objective(const std::vector<double>& cost) {
    reduced_ = cost;
    objective_ = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      objective_ += cb * rhs_[i];
      const double* row = &tableau_[i * cols_];
      for (std::size_t j = 0; j < cols_; ++j) reduced_[j] -= cb * row[j];
    }
  }

  // Returns false when unbounded.
  bool run_pivots() {
    for (;;) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < n_; ++j) {
        if (reduced_[j] < -kReducedTol) {
          enter = j;
          break;
        }
      }
      if (enter == cols_) return true;

      std::size_t leave = m_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        const double d = tableau_[i * cols_ + enter];
        if (d > kPivotTol) {
          const double ratio = rhs_[i] / d;
          if (ratio < best_ratio - 1e-12 ||
              (ratio < best_ratio + 1e-12 && (leave == m_ || basis_[i] < basis_[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave == m_) return false;
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t row, std::size_t col) {
    double* prow = &tableau_[row * cols_];
    const double inv = 1.0 / prow[col];
    for (std::size_t j = 0; j < cols_; ++j) prow[j] *= inv;
    rhs_[row] *= inv;
    prow[col] = 1.0;

    for (std::size_t i = 0; i < m_; ++i) {
      if (i == row) continue;
      double* r = &tableau_[i * cols_];
      const double f = r[col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) r[j] -= f * prow[j];
      r[col] = 0.0;
      rhs_[i] -= f * rhs_[row];
      if (rhs_[i] < 0.0 && rhs_[i] > -1e-12) rhs_[i] = 0.0;
    }

    const double f = reduced_[col];
    if (f != 0.0) {
      for (std::size_t j = 0; j < cols_; ++j) reduced_[j] -= f * prow[j];
      reduced_[col] = 0.0;
      objective_ += f * rhs_[row];
    }
    basis_[row] = col;
  }

  void drive_out_artificials() {
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      std::size_t col = cols_;
      for (std::size_t j = 0; j < n_; ++j) {
        if (std::abs(tableau_[i * cols_ + j]) > kPivotTol) {
          col = j;
          break;
        }
      }
      if (col == cols_) {
        // Redundant row; the artificial stays basic at zero and the
        // sub-tolerance coefficients keep it out of every ratio test.
        rhs_[i] = 0.0;
        continue;
      }
      pivot(i, col);
    }
  }

  std::size_t m_, n_, cols_ = 0;
  std::vector<double> a_, b_, c_;
  std::vector<double> tableau_, rhs_, reduced_;
  std::vector<std::size_t> basis_;
  double objective_ = 0.0;
};

inline LpResult solve_dense_lp(std::vector<double> a, std::size_t rows, std::size_t cols,
                               std::vector<double> b, std::vector<double> c) {
  DenseSimplex s(std::move(a), rows, cols, std::move(b), std::move(c));
  return s.solve();
}

}  // namespace otproj
