#pragma once

// Core value types: discrete measures on a coordinate space, joint measures
// on a K-fold product space, separable cost specifications, and per-coordinate
// marginal systems. All types are immutable after construction and safe to
// share across threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otproj {

using Point = std::vector<double>;

constexpr double kMassTolerance = 1e-12;

namespace detail {

inline bool lex_less(const Point& a, const Point& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Sorts atoms lexicographically, merges exactly-equal atoms, drops zero
// weights, validates nonnegativity and total mass. Atom equality is exact
// bitwise equality on coordinates: inputs are categorical codes or sampled
// floats that repeat only by construction.
inline void canonicalize(std::vector<Point>& atoms, std::vector<double>& weights,
                         bool require_unit_mass) {
  if (atoms.size() != weights.size())
    throw std::invalid_argument("measure: atoms/weights length mismatch");
  if (atoms.empty()) throw std::invalid_argument("measure: empty support");
  const std::size_t dim = atoms.front().size();
  for (const auto& a : atoms)
    if (a.size() != dim) throw std::invalid_argument("measure: ragged atom dimensions");
  for (double w : weights)
    if (!(w >= 0.0)) throw std::invalid_argument("measure: negative or NaN weight");

  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (atoms[i] == atoms[j]) return i < j;
    return lex_less(atoms[i], atoms[j]);
  });

  std::vector<Point> out_atoms;
  std::vector<double> out_weights;
  out_atoms.reserve(atoms.size());
  out_weights.reserve(atoms.size());
  for (std::size_t k : order) {
    if (!out_atoms.empty() && out_atoms.back() == atoms[k]) {
      out_weights.back() += weights[k];
    } else {
      out_atoms.push_back(atoms[k]);
      out_weights.push_back(weights[k]);
    }
  }
  // Zero-weight atoms are dropped so transport graphs never see empty nodes.
  std::vector<Point> final_atoms;
  std::vector<double> final_weights;
  for (std::size_t i = 0; i < out_atoms.size(); ++i) {
    if (out_weights[i] > 0.0) {
      final_atoms.push_back(std::move(out_atoms[i]));
      final_weights.push_back(out_weights[i]);
    }
  }
  if (final_atoms.empty()) throw std::invalid_argument("measure: all weights zero");

  if (require_unit_mass) {
    double total = std::accumulate(final_weights.begin(), final_weights.end(), 0.0);
    if (std::abs(total - 1.0) > kMassTolerance)
      throw std::invalid_argument("measure: weights sum to " + std::to_string(total) +
                                  ", expected 1");
  }
  atoms = std::move(final_atoms);
  weights = std::move(final_weights);
}

}  // namespace detail

class DiscreteMeasure {
 public:
  DiscreteMeasure(std::vector<Point> atoms, std::vector<double> weights) {
    detail::canonicalize(atoms, weights, /*require_unit_mass=*/true);
    atoms_ = std::move(atoms);
    weights_ = std::move(weights);
  }

  static DiscreteMeasure from_samples(const std::vector<Point>& rows) {
    if (rows.empty()) throw std::invalid_argument("from_samples: empty input");
    std::vector<double> w(rows.size(), 1.0 / static_cast<double>(rows.size()));
    return DiscreteMeasure(rows, std::move(w));
  }

  static DiscreteMeasure from_scalars(const std::vector<double>& values) {
    std::vector<Point> pts;
    pts.reserve(values.size());
    for (double v : values) pts.push_back({v});
    return from_samples(pts);
  }

  const std::vector<Point>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return atoms_.size(); }
  std::size_t dim() const { return atoms_.front().size(); }

  // Index of an exactly-equal atom, or npos.
  std::size_t find(const Point& p) const {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), p, detail::lex_less);
    if (it != atoms_.end() && *it == p)
      return static_cast<std::size_t>(it - atoms_.begin());
    return npos;
  }

  // Drops atoms below the floor and renormalizes. Pruning is explicit;
  // construction keeps sub-1e-15 weights to preserve exact mass balance.
  DiscreteMeasure pruned(double floor) const {
    std::vector<Point> a;
    std::vector<double> w;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (weights_[i] >= floor) {
        a.push_back(atoms_[i]);
        w.push_back(weights_[i]);
      }
    }
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("pruned: floor removes all mass");
    for (double& x : w) x /= total;
    return DiscreteMeasure(std::move(a), std::move(w));
  }

  bool operator==(const DiscreteMeasure& other) const {
    return atoms_ == other.atoms_ && weights_ == other.weights_;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<Point> atoms_;
  std::vector<double> weights_;
};

class JointMeasure {
 public:
  JointMeasure(std::vector<std::size_t> dims, std::vector<Point> atoms,
               std::vector<double> weights)
      : dims_(std::move(dims)) {
    if (dims_.empty()) throw std::invalid_argument("joint measure: no coordinates");
    offsets_.resize(dims_.size() + 1, 0);
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] == 0) throw std::invalid_argument("joint measure: zero-dim coordinate");
      offsets_[i + 1] = offsets_[i] + dims_[i];
    }
    for (const auto& a : atoms)
      if (a.size() != offsets_.back())
        throw std::invalid_argument("joint measure: atom length != sum of dims");
    detail::canonicalize(atoms, weights, /*require_unit_mass=*/true);
    atoms_ = std::move(atoms);
    weights_ = std::move(weights);
  }

  // Empirical measure of coupled rows, uniform weights, duplicates merged.
  static JointMeasure from_samples(std::vector<std::size_t> dims,
                                   const std::vector<Point>& rows) {
    if (rows.empty()) throw std::invalid_argument("from_samples: empty input");
    std::vector<double> w(rows.size(), 1.0 / static_cast<double>(rows.size()));
    return JointMeasure(std::move(dims), rows, std::move(w));
  }

  // Rows of scalar coordinates (d_i = 1 for all i), the common CSV shape.
  static JointMeasure from_rows(const std::vector<Point>& rows) {
    if (rows.empty()) throw std::invalid_argument("from_rows: empty input");
    std::vector<std::size_t> dims(rows.front().size(), 1);
    return from_samples(std::move(dims), rows);
  }

  std::size_t num_coords() const { return dims_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<Point>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return atoms_.size(); }

  std::span<const double> block(std::size_t atom, std::size_t coord) const {
    return {atoms_[atom].data() + offsets_[coord], dims_[coord]};
  }

  Point block_point(std::size_t atom, std::size_t coord) const {
    auto b = block(atom, coord);
    return Point(b.begin(), b.end());
  }

  JointMeasure pruned(double floor) const {
    std::vector<Point> a;
    std::vector<double> w;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (weights_[i] >= floor) {
        a.push_back(atoms_[i]);
        w.push_back(weights_[i]);
      }
    }
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("pruned: floor removes all mass");
    for (double& x : w) x /= total;
    return JointMeasure(dims_, std::move(a), std::move(w));
  }

  bool operator==(const JointMeasure& other) const {
    return dims_ == other.dims_ && atoms_ == other.atoms_ && weights_ == other.weights_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<Point> atoms_;
  std::vector<double> weights_;
};

// Pushforward of a joint measure under the coordinate projection.
inline DiscreteMeasure marginalize(const JointMeasure& joint, std::size_t axis) {
  if (axis >= joint.num_coords())
    throw std::out_of_range("marginalize: axis out of range");
  std::vector<Point> atoms;
  atoms.reserve(joint.size());
  for (std::size_t i = 0; i < joint.size(); ++i) atoms.push_back(joint.block_point(i, axis));
  return DiscreteMeasure(std::move(atoms), joint.weights());
}

inline JointMeasure empirical_from_samples(const std::vector<Point>& rows) {
  return JointMeasure::from_rows(rows);
}

enum class Metric { Euclidean, AbsDiff, Discrete01, Matrix };

struct CoordMetric {
  Metric kind = Metric::Euclidean;
  // Row-major user matrix for Metric::Matrix; points are integer codes.
  std::vector<std::vector<double>> matrix;

  double distance(std::span<const double> x, std::span<const double> z) const {
    if (x.size() != z.size())
      throw std::invalid_argument("ground metric: nonconformable points");
    switch (kind) {
      case Metric::Euclidean: {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double d = x[i] - z[i];
          s += d * d;
        }
        return std::sqrt(s);
      }
      case Metric::AbsDiff: {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - z[i]);
        return s;
      }
      case Metric::Discrete01: {
        for (std::size_t i = 0; i < x.size(); ++i)
          if (x[i] != z[i]) return 1.0;
        return 0.0;
      }
      case Metric::Matrix: {
        if (x.size() != 1)
          throw std::invalid_argument("matrix metric expects scalar codes");
        const auto a = static_cast<std::size_t>(x[0]);
        const auto b = static_cast<std::size_t>(z[0]);
        if (a >= matrix.size() || b >= matrix.size())
          throw std::out_of_range("matrix metric: code out of range");
        return matrix[a][b];
      }
    }
    throw std::logic_error("unreachable");
  }
};

// Separable product cost: d_{Z,p}(x,z) = (sum_i d_i(x_i,z_i)^p)^(1/p).
class CostSpec {
 public:
  CostSpec(std::vector<CoordMetric> coords, double p)
      : coords_(std::move(coords)), p_(p) {
    if (coords_.empty()) throw std::invalid_argument("cost spec: no coordinates");
    if (!(p_ >= 1.0)) throw std::invalid_argument("cost spec: p must be >= 1");
  }

  static CostSpec uniform(std::size_t k, Metric m, double p) {
    return CostSpec(std::vector<CoordMetric>(k, CoordMetric{m, {}}), p);
  }

  std::size_t num_coords() const { return coords_.size(); }
  double p() const { return p_; }
  const CoordMetric& coord(std::size_t i) const { return coords_.at(i); }

  double ground(std::size_t i, std::span<const double> x, std::span<const double> z) const {
    return coords_.at(i).distance(x, z);
  }

  double ground_pow(std::size_t i, std::span<const double> x,
                    std::span<const double> z) const {
    return std::pow(coords_.at(i).distance(x, z), p_);
  }

  // d_{Z,p}^p over flattened product-space points laid out by dims.
  double product_cost_pow(std::span<const double> x, std::span<const double> z,
                          const std::vector<std::size_t>& dims) const {
    if (dims.size() != coords_.size())
      throw std::invalid_argument("product cost: K mismatch");
    std::size_t total = 0;
    for (std::size_t d : dims) total += d;
    if (x.size() != total || z.size() != total)
      throw std::invalid_argument("product cost: nonconformable points");
    double s = 0.0;
    std::size_t off = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      s += ground_pow(i, x.subspan(off, dims[i]), z.subspan(off, dims[i]));
      off += dims[i];
    }
    return s;
  }

  double product_cost(std::span<const double> x, std::span<const double> z,
                      const std::vector<std::size_t>& dims) const {
    return std::pow(product_cost_pow(x, z, dims), 1.0 / p_);
  }

 private:
  std::vector<CoordMetric> coords_;
  double p_;
};

// The K per-coordinate measures with their sample sizes.
class MarginalSystem {
 public:
  MarginalSystem(std::vector<DiscreteMeasure> measures, std::vector<std::size_t> sizes)
      : measures_(std::move(measures)), sizes_(std::move(sizes)) {
    if (measures_.empty()) throw std::invalid_argument("marginal system: empty");
    if (sizes_.size() != measures_.size())
      throw std::invalid_argument("marginal system: sizes length mismatch");
  }

  explicit MarginalSystem(std::vector<DiscreteMeasure> measures)
      : MarginalSystem(std::move(measures),
                       std::vector<std::size_t>(measures.size(), 0)) {}

  static MarginalSystem of_joint(const JointMeasure& joint, std::size_t sample_size = 0) {
    std::vector<DiscreteMeasure> m;
    m.reserve(joint.num_coords());
    for (std::size_t i = 0; i < joint.num_coords(); ++i) m.push_back(marginalize(joint, i));
    return MarginalSystem(std::move(m),
                          std::vector<std::size_t>(joint.num_coords(), sample_size));
  }

  std::size_t num_coords() const { return measures_.size(); }
  const DiscreteMeasure& coord(std::size_t i) const { return measures_.at(i); }
  std::size_t sample_size(std::size_t i) const { return sizes_.at(i); }

  void check_conformable(const JointMeasure& joint) const {
    if (joint.num_coords() != measures_.size())
      throw std::invalid_argument("marginal system: K mismatch with joint");
    for (std::size_t i = 0; i < measures_.size(); ++i)
      if (measures_[i].dim() != joint.dims()[i])
        throw std::invalid_argument("marginal system: coordinate dim mismatch");
  }

 private:
  std::vector<DiscreteMeasure> measures_;
  std::vector<std::size_t> sizes_;
};

}  // namespace otproj
