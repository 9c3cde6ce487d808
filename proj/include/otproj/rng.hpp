#pragma once

// Seeded RNG utilities. std::mt19937_64 is bit-specified by the standard,
// but the std:: distributions are not, so samplers are written out here to
// keep runs reproducible across compilers.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace otproj {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives independent stream seeds, e.g. one per replication or resample.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1).
  double uniform() {
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (-n) % n;
      while (lo < t) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via polar Box-Muller (spare cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Index draw from an unnormalized weight vector (linear scan; supports
  // here are small).
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.empty() ? throw std::invalid_argument("categorical: empty weights")
                           : weights.size() - 1;
  }

  // First k entries of a random permutation of [0,n) (partial Fisher-Yates).
  void sample_without_replacement(std::size_t n, std::size_t k,
                                  std::vector<std::uint32_t>& scratch,
                                  std::vector<std::uint32_t>& out) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    if (scratch.size() != n) {
      scratch.resize(n);
      for (std::size_t i = 0; i < n; ++i) scratch[i] = static_cast<std::uint32_t>(i);
    }
    out.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(scratch[i], scratch[j]);
      out[i] = scratch[i];
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace otproj
