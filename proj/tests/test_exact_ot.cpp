#include <catch2/catch_amalgamated.hpp>

#include "otproj/exact_ot.hpp"
#include "otproj/rng.hpp"
#include "test_util.hpp"

#include <functional>

using namespace otproj;

namespace {

// Transportation LP matrix with the redundant last row dropped, for the
// exhaustive oracle.
void transport_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const CoordMetric& metric, double p, std::vector<double>& a,
                  std::vector<double>& b, std::vector<double>& c, std::size_t& rows,
                  std::size_t& cols) {
  const std::size_t r = mu.size(), s = nu.size();
  rows = r + s - 1;
  cols = r * s;
  a.assign(rows * cols, 0.0);
  b.assign(rows, 0.0);
  c.assign(cols, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < s; ++j) {
      c[i * s + j] = std::pow(metric.distance(mu.atoms()[i], nu.atoms()[j]), p);
      a[i * cols + i * s + j] = 1.0;
      if (j + 1 < s) a[(r + j) * cols + i * s + j] = 1.0;
    }
  for (std::size_t i = 0; i < r; ++i) b[i] = mu.weights()[i];
  for (std::size_t j = 0; j + 1 < s; ++j) b[r + j] = nu.weights()[j];
}

double oracle_wasserstein_pow(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              const CoordMetric& metric, double p) {
  std::vector<double> a, b, c;
  std::size_t rows, cols;
  transport_lp(mu, nu, metric, p, a, b, c, rows, cols);
  auto v = testutil::enumerate_lp_optimum(a, rows, cols, b, c);
  REQUIRE(v.has_value());
  return *v;
}

void check_plan_invariants(const TransportPlan& plan, const CoordMetric& metric, double p) {
  auto rs = plan.row_sums();
  auto cs = plan.col_sums();
  for (std::size_t i = 0; i < rs.size(); ++i)
    REQUIRE(rs[i] == Catch::Approx(plan.row_measure.weights()[i]).margin(1e-10));
  for (std::size_t j = 0; j < cs.size(); ++j)
    REQUIRE(cs[j] == Catch::Approx(plan.col_measure.weights()[j]).margin(1e-10));
  double obj = 0.0;
  for (const auto& e : plan.entries) {
    REQUIRE(e.mass >= 0.0);
    obj += e.mass * std::pow(metric.distance(plan.row_measure.atoms()[e.row],
                                             plan.col_measure.atoms()[e.col]),
                             p);
  }
  REQUIRE(obj == Catch::Approx(plan.objective).margin(1e-10));
}

}  // namespace

TEST_CASE("identical measures couple diagonally at zero cost") {
  DiscreteMeasure m({{0.0}, {1.0}, {2.5}}, {0.2, 0.5, 0.3});
  const CoordMetric metric{Metric::AbsDiff, {}};
  for (auto method : {OtMethod::NetworkSimplex, OtMethod::Monotone}) {
    TransportPlan plan = solve_exact(m, m, metric, 1.0, method);
    REQUIRE(plan.objective == Catch::Approx(0.0).margin(1e-15));
    check_plan_invariants(plan, metric, 1.0);
  }
}

TEST_CASE("two diracs at distance 3") {
  DiscreteMeasure mu({{0.0}}, {1.0});
  DiscreteMeasure nu({{3.0}}, {1.0});
  TransportPlan plan = solve_exact(mu, nu, {Metric::AbsDiff, {}}, 1.0);
  REQUIRE(plan.wasserstein(1.0) == Catch::Approx(3.0));
}

TEST_CASE("2x2 vertex-enumeration value") {
  DiscreteMeasure mu({{0.0}, {1.0}}, {0.5, 0.5});
  DiscreteMeasure nu({{0.0}, {1.0}}, {0.25, 0.75});
  // Both polytope vertices enumerated by hand: optimum 0.25.
  for (auto method : {OtMethod::NetworkSimplex, OtMethod::Monotone}) {
    TransportPlan plan = solve_exact(mu, nu, {Metric::AbsDiff, {}}, 1.0, method);
    REQUIRE(plan.wasserstein(1.0) == Catch::Approx(0.25));
  }
}

TEST_CASE("network simplex matches the exhaustive oracle") {
  Rng rng(1234);
  const CoordMetric metric{Metric::AbsDiff, {}};
  for (int trial = 0; trial < 40; ++trial) {
    const double p = (trial % 2 == 0) ? 1.0 : 2.0;
    DiscreteMeasure mu = testutil::random_measure(rng, 2 + rng.below(2));
    DiscreteMeasure nu = testutil::random_measure(rng, 2 + rng.below(2));
    TransportPlan plan = solve_exact(mu, nu, metric, p, OtMethod::NetworkSimplex);
    check_plan_invariants(plan, metric, p);
    const double oracle = oracle_wasserstein_pow(mu, nu, metric, p);
    REQUIRE(plan.objective == Catch::Approx(oracle).margin(1e-9));
    // Monotone shortcut agrees on 1-D convex costs.
    TransportPlan mono = solve_exact(mu, nu, metric, p, OtMethod::Monotone);
    REQUIRE(mono.objective == Catch::Approx(oracle).margin(1e-9));
  }
}

TEST_CASE("network simplex handles 0/1 metrics") {
  Rng rng(77);
  CoordMetric disc{Metric::Discrete01, {}};
  for (int trial = 0; trial < 20; ++trial) {
    DiscreteMeasure mu = testutil::random_measure(rng, 3);
    DiscreteMeasure nu = testutil::random_measure(rng, 3);
    TransportPlan plan = solve_exact(mu, nu, disc, 1.0);
    const double oracle = oracle_wasserstein_pow(mu, nu, disc, 1.0);
    REQUIRE(plan.objective == Catch::Approx(oracle).margin(1e-9));
  }
}

TEST_CASE("objective invariant under atom permutation") {
  Rng rng(5);
  std::vector<Point> atoms{{3.0}, {0.0}, {1.5}};
  std::vector<double> w{0.3, 0.4, 0.3};
  DiscreteMeasure a(atoms, w);
  DiscreteMeasure b({{1.5}, {3.0}, {0.0}}, {0.3, 0.3, 0.4});
  REQUIRE(a == b);  // canonical atom order makes relabeling a no-op
  DiscreteMeasure nu = testutil::random_measure(rng, 3);
  REQUIRE(solve_exact(a, nu, {Metric::AbsDiff, {}}, 2.0).objective ==
          solve_exact(b, nu, {Metric::AbsDiff, {}}, 2.0).objective);
}

TEST_CASE("wasserstein symmetry and triangle inequality") {
  Rng rng(99);
  const CoordMetric metric{Metric::AbsDiff, {}};
  for (int trial = 0; trial < 30; ++trial) {
    const double p = (trial % 2 == 0) ? 1.0 : 2.0;
    DiscreteMeasure a = testutil::random_measure(rng, 2 + rng.below(3));
    DiscreteMeasure b = testutil::random_measure(rng, 2 + rng.below(3));
    DiscreteMeasure c = testutil::random_measure(rng, 2 + rng.below(3));
    const double ab = solve_exact(a, b, metric, p).wasserstein(p);
    const double ba = solve_exact(b, a, metric, p).wasserstein(p);
    const double bc = solve_exact(b, c, metric, p).wasserstein(p);
    const double ac = solve_exact(a, c, metric, p).wasserstein(p);
    REQUIRE(ab == Catch::Approx(ba).margin(1e-9));
    REQUIRE(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("wasserstein_vector aggregates per-coordinate distances") {
  DiscreteMeasure m0({{0.0}}, {1.0}), m3({{3.0}}, {1.0});
  DiscreteMeasure n0({{0.0}}, {1.0}), n4({{4.0}}, {1.0});
  MarginalSystem a({m0, n0});
  MarginalSystem b({m3, n4});
  CostSpec c1 = CostSpec::uniform(2, Metric::AbsDiff, 1.0);
  CostSpec c2 = CostSpec::uniform(2, Metric::AbsDiff, 2.0);
  REQUIRE(wasserstein_vector(a, b, c1) == Catch::Approx(7.0));
  REQUIRE(wasserstein_vector(a, b, c2) == Catch::Approx(5.0));
  REQUIRE(wasserstein_vector(a, a, c2) == Catch::Approx(0.0));
  MarginalSystem bad({m0});
  REQUIRE_THROWS_AS(wasserstein_vector(a, bad, c1), std::invalid_argument);
}

TEST_CASE("exact_joint_wasserstein basics") {
  CostSpec cost = CostSpec::uniform(2, Metric::AbsDiff, 2.0);
  JointMeasure a = empirical_from_samples({{0, 0}, {1, 1}});
  REQUIRE(exact_joint_wasserstein(a, a, cost) == Catch::Approx(0.0).margin(1e-12));

  JointMeasure dx = empirical_from_samples({{0, 0}});
  JointMeasure dz = empirical_from_samples({{3, 4}});
  REQUIRE(exact_joint_wasserstein(dx, dz, cost) == Catch::Approx(5.0));
}

TEST_CASE("exact_joint_wasserstein matches the dense-LP oracle") {
  Rng rng(2024);
  CostSpec cost = CostSpec::uniform(2, Metric::AbsDiff, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    JointMeasure a = testutil::random_joint(rng, 2, 2, 3);
    JointMeasure b = testutil::random_joint(rng, 2, 2, 3);
    std::vector<double> lpa, lpb, lpc;
    const std::size_t r = a.size(), s = b.size();
    const std::size_t rows = r + s - 1, cols = r * s;
    lpa.assign(rows * cols, 0.0);
    lpb.assign(rows, 0.0);
    lpc.assign(cols, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < s; ++j) {
        lpc[i * s + j] = cost.product_cost_pow(a.atoms()[i], b.atoms()[j], a.dims());
        lpa[i * cols + i * s + j] = 1.0;
        if (j + 1 < s) lpa[(r + j) * cols + i * s + j] = 1.0;
      }
    for (std::size_t i = 0; i < r; ++i) lpb[i] = a.weights()[i];
    for (std::size_t j = 0; j + 1 < s; ++j) lpb[r + j] = b.weights()[j];
    auto oracle = testutil::enumerate_lp_optimum(lpa, rows, cols, lpb, lpc);
    REQUIRE(oracle.has_value());
    REQUIRE(exact_joint_wasserstein(a, b, cost) == Catch::Approx(*oracle).margin(1e-9));
  }
}

TEST_CASE("mass imbalance is rejected") {
  DiscreteMeasure mu({{0.0}, {1.0}}, {0.5, 0.5});
  std::vector<double> cost{0.0, 1.0, 1.0, 0.0};
  std::vector<double> bad_demand{0.3, 0.6};
  REQUIRE_THROWS_AS(detail::TransportSimplex(mu.weights(), bad_demand, cost),
                    std::invalid_argument);
}

TEST_CASE("mot_bruteforce reduces to pairwise OT for K=1") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    DiscreteMeasure mu = testutil::random_measure(rng, 3);
    JointMeasure joint = testutil::random_joint(rng, 1, 3, 4);
    MarginalSystem sys({mu});
    CostSpec cost = CostSpec::uniform(1, Metric::AbsDiff, 2.0);
    MotSolution mot = mot_bruteforce(sys, joint, cost);
    TransportPlan direct = solve_exact(mu, marginalize(joint, 0), cost.coord(0), 2.0);
    REQUIRE(mot.objective == Catch::Approx(direct.objective).margin(1e-9));
  }
}

TEST_CASE("mot_bruteforce is zero when the joint already has the right marginals") {
  JointMeasure joint = empirical_from_samples({{0, 1}, {1, 0}, {1, 1}, {0, 1}});
  MarginalSystem sys = MarginalSystem::of_joint(joint);
  CostSpec cost = CostSpec::uniform(2, Metric::AbsDiff, 1.0);
  MotSolution mot = mot_bruteforce(sys, joint, cost);
  REQUIRE(mot.value == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("mot_bruteforce enforces the variable cap") {
  JointMeasure joint = empirical_from_samples({{0, 0}, {1, 1}});
  MarginalSystem sys = MarginalSystem::of_joint(joint);
  CostSpec cost = CostSpec::uniform(2, Metric::AbsDiff, 1.0);
  REQUIRE_THROWS_AS(mot_bruteforce(sys, joint, cost, 3), std::runtime_error);
}
