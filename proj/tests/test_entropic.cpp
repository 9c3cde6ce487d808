#include <catch2/catch_amalgamated.hpp>

#include "otproj/entropic_ot.hpp"
#include "otproj/exact_ot.hpp"
#include "test_util.hpp"

using namespace otproj;

TEST_CASE("huge eta relaxes to the product coupling") {
  DiscreteMeasure mu({{0.0}, {1.0}, {3.0}}, {0.2, 0.3, 0.5});
  DiscreteMeasure nu({{0.5}, {2.0}}, {0.6, 0.4});
  const CoordMetric metric{Metric::AbsDiff, {}};
  EntropicPlan plan = sinkhorn(mu, nu, metric, 2.0, 1e6 * 9.0);
  for (std::size_t a = 0; a < mu.size(); ++a)
    for (std::size_t b = 0; b < nu.size(); ++b)
      REQUIRE(plan.matrix[a * nu.size() + b] ==
              Catch::Approx(mu.weights()[a] * nu.weights()[b]).margin(1e-6));
  // KL of the near-product plan vanishes, entropic objective ~ transport.
  REQUIRE(plan.kl_term() == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(entropic_objective(plan) >= plan.transport_cost());
}

TEST_CASE("symmetric instance yields a symmetric plan") {
  DiscreteMeasure u({{0.0}, {1.0}}, {0.5, 0.5});
  EntropicPlan plan = sinkhorn(u, u, {Metric::AbsDiff, {}}, 2.0, 0.5);
  REQUIRE(plan.matrix[0 * 2 + 1] == Catch::Approx(plan.matrix[1 * 2 + 0]).margin(1e-12));
  REQUIRE(plan.matrix[0 * 2 + 0] == Catch::Approx(plan.matrix[1 * 2 + 1]).margin(1e-12));
}

TEST_CASE("small eta approaches the exact objective") {
  Rng rng(42);
  const CoordMetric metric{Metric::AbsDiff, {}};
  DiscreteMeasure mu = testutil::random_measure(rng, 3);
  DiscreteMeasure nu = testutil::random_measure(rng, 3);
  double mean_cost = 0.0;
  for (const auto& xa : mu.atoms())
    for (const auto& xb : nu.atoms()) mean_cost += metric.distance(xa, xb);
  mean_cost /= 9.0;
  SinkhornOptions opt;
  opt.max_iter = 2000000;
  EntropicPlan plan = sinkhorn(mu, nu, metric, 1.0, 0.01 * mean_cost, opt);
  TransportPlan exact = solve_exact(mu, nu, metric, 1.0);
  REQUIRE(plan.transport_cost() == Catch::Approx(exact.objective).margin(1e-4));
  REQUIRE(plan.kl_term() >= 0.0);
}

TEST_CASE("marginal feasibility within tolerance and strict positivity") {
  Rng rng(7);
  DiscreteMeasure mu = testutil::random_measure(rng, 4);
  DiscreteMeasure nu = testutil::random_measure(rng, 3);
  EntropicPlan plan = sinkhorn(mu, nu, {Metric::AbsDiff, {}}, 2.0, 0.25);
  REQUIRE(plan.marginal_violation <= 1e-9);
  auto rs = plan.row_sums();
  auto cs = plan.col_sums();
  for (std::size_t a = 0; a < mu.size(); ++a)
    REQUIRE(rs[a] == Catch::Approx(mu.weights()[a]).margin(1e-8));
  for (std::size_t b = 0; b < nu.size(); ++b)
    REQUIRE(cs[b] == Catch::Approx(nu.weights()[b]).margin(1e-8));
  for (double v : plan.matrix) REQUIRE(v > 0.0);
}

TEST_CASE("gibbs form: log-plan minus -cost/eta is rank-one additive") {
  Rng rng(11);
  DiscreteMeasure mu = testutil::random_measure(rng, 3);
  DiscreteMeasure nu = testutil::random_measure(rng, 4);
  const double eta = 0.125;
  EntropicPlan plan = sinkhorn(mu, nu, {Metric::AbsDiff, {}}, 2.0, eta);
  const std::size_t c = nu.size();
  for (std::size_t a = 0; a < mu.size(); ++a)
    for (std::size_t b = 0; b < c; ++b) {
      const double expected = plan.f[a] / eta + std::log(mu.weights()[a]) +
                              plan.g[b] / eta + std::log(nu.weights()[b]) -
                              plan.cost_pow[a * c + b] / eta;
      REQUIRE(std::log(plan.matrix[a * c + b]) == Catch::Approx(expected).margin(1e-8));
    }
}

TEST_CASE("dual objective improves monotonically") {
  Rng rng(13);
  DiscreteMeasure mu = testutil::random_measure(rng, 5);
  DiscreteMeasure nu = testutil::random_measure(rng, 5);
  std::vector<double> trace;
  SinkhornOptions opt;
  opt.track_dual = true;
  opt.dual_trace = &trace;
  opt.tol = 1e-10;
  opt.max_iter = 1000000;
  opt.adaptive_overrelax = false;  // canonical alternating maximization
  sinkhorn(mu, nu, {Metric::AbsDiff, {}}, 2.0, 0.05, opt);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) REQUIRE(trace[i] >= trace[i - 1] - 1e-12);
}

TEST_CASE("vanishing bias along the eta grid on a fixed concentrated instance") {
  DiscreteMeasure mu({{0.0}, {1.0}, {2.0}}, {0.9, 0.05, 0.05});
  DiscreteMeasure nu({{0.0}, {1.0}, {2.0}}, {0.85, 0.1, 0.05});
  const CoordMetric metric{Metric::AbsDiff, {}};
  TransportPlan exact = solve_exact(mu, nu, metric, 2.0);
  SinkhornOptions opt;
  opt.max_iter = 5000000;
  double prev_gap = std::numeric_limits<double>::infinity();
  std::vector<double> warm_f, warm_g;
  for (int e = 0; e >= -10; --e) {
    if (!warm_f.empty()) {
      opt.f0 = &warm_f;
      opt.g0 = &warm_g;
    }
    EntropicPlan plan = sinkhorn(mu, nu, metric, 2.0, std::pow(2.0, e), opt);
    warm_f = plan.f;
    warm_g = plan.g;
    const double gap = entropic_objective(plan) - exact.objective;
    REQUIRE(gap >= -1e-9);
    REQUIRE(gap <= prev_gap + 1e-9);
    prev_gap = gap;
    if (e == -10) REQUIRE(gap < 1e-3);
  }
}

TEST_CASE("invalid inputs and non-convergence carry diagnostics") {
  DiscreteMeasure mu({{0.0}, {1.0}}, {0.5, 0.5});
  DiscreteMeasure nu({{0.0}, {2.0}}, {0.4, 0.6});
  REQUIRE_THROWS_AS(sinkhorn(mu, nu, {Metric::AbsDiff, {}}, 1.0, 0.0),
                    std::invalid_argument);
  SinkhornOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-14;
  try {
    sinkhorn(mu, nu, {Metric::AbsDiff, {}}, 1.0, 0.01, opt);
    FAIL("expected SinkhornNonConvergence");
  } catch (const SinkhornNonConvergence& e) {
    REQUIRE(e.violation > 1e-14);
    REQUIRE(e.iterations == 1);
  }
}
