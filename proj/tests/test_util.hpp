#pragma once

// Test-only helpers: an exhaustive basic-solution LP oracle (independent of
// the simplex implementations under test) and random-instance generators.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "otproj/measures.hpp"
#include "otproj/rng.hpp"

namespace testutil {

// min <c,x> s.t. Ax = b with x >= 0 off `free_vars`, by enumerating every
// column subset of size `rows`, solving by Gaussian elimination, and keeping
// the best feasible basic solution. Assumes A has full row rank.
inline std::optional<double> enumerate_lp_optimum(
    const std::vector<double>& a, std::size_t rows, std::size_t cols,
    const std::vector<double>& b, const std::vector<double>& c,
    const std::vector<bool>& free_vars = {}) {
  std::vector<std::size_t> subset(rows);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;

  std::vector<double> m(rows * (rows + 1));
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start,
                                                          std::size_t depth) {
    if (depth == rows) {
      // Solve A_I y = b.
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < rows; ++k) m[r * (rows + 1) + k] = a[r * cols + subset[k]];
        m[r * (rows + 1) + rows] = b[r];
      }
      for (std::size_t col = 0; col < rows; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < rows; ++r)
          if (std::abs(m[r * (rows + 1) + col]) > std::abs(m[piv * (rows + 1) + col]))
            piv = r;
        if (std::abs(m[piv * (rows + 1) + col]) < 1e-10) return;  // singular subset
        if (piv != col)
          for (std::size_t k = 0; k <= rows; ++k)
            std::swap(m[piv * (rows + 1) + k], m[col * (rows + 1) + k]);
        const double inv = 1.0 / m[col * (rows + 1) + col];
        for (std::size_t k = col; k <= rows; ++k) m[col * (rows + 1) + k] *= inv;
        for (std::size_t r = 0; r < rows; ++r) {
          if (r == col) continue;
          const double f = m[r * (rows + 1) + col];
          if (f == 0.0) continue;
          for (std::size_t k = col; k <= rows; ++k)
            m[r * (rows + 1) + k] -= f * m[col * (rows + 1) + k];
        }
      }
      double value = 0.0;
      for (std::size_t k = 0; k < rows; ++k) {
        const double y = m[k * (rows + 1) + rows];
        const bool is_free = !free_vars.empty() && free_vars[subset[k]];
        if (!is_free && y < -1e-9) return;
        value += c[subset[k]] * y;
      }
      if (value < best) best = value;
      found = true;
      return;
    }
    for (std::size_t j = start; j + (rows - depth) <= cols; ++j) {
      subset[depth] = j;
      rec(j + 1, depth + 1);
    }
  };
  rec(0, 0);
  if (!found) return std::nullopt;
  return best;
}

inline std::vector<double> random_simplex_weights(otproj::Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& v : w) total += (v = -std::log(1.0 - rng.uniform()));
  for (double& v : w) v /= total;
  return w;
}

inline otproj::DiscreteMeasure random_measure(otproj::Rng& rng, std::size_t support,
                                              double spread = 4.0) {
  std::vector<otproj::Point> atoms;
  std::vector<char> used(32, 0);
  while (atoms.size() < support) {
    const std::size_t v = rng.below(2 * support + 4);
    if (used[v]) continue;
    used[v] = 1;
    atoms.push_back({spread * static_cast<double>(v) / static_cast<double>(2 * support)});
  }
  return otproj::DiscreteMeasure(std::move(atoms), random_simplex_weights(rng, support));
}

// Random joint measure on K scalar coordinates with values in {0..levels-1}.
inline otproj::JointMeasure random_joint(otproj::Rng& rng, std::size_t k,
                                         std::size_t atoms, std::size_t levels) {
  std::vector<otproj::Point> pts;
  for (std::size_t a = 0; a < atoms; ++a) {
    otproj::Point p(k);
    for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<double>(rng.below(levels));
    pts.push_back(std::move(p));
  }
  auto w = random_simplex_weights(rng, atoms);
  return otproj::JointMeasure(std::vector<std::size_t>(k, 1), std::move(pts), std::move(w));
}

}  // namespace testutil
