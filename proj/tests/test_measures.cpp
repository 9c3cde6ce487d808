#include <catch2/catch_amalgamated.hpp>

#include "otproj/measures.hpp"
#include "otproj/rng.hpp"

using namespace otproj;

TEST_CASE("discrete measure canonicalization merges duplicates") {
  DiscreteMeasure m({{1.0}, {0.0}, {1.0}}, {0.25, 0.5, 0.25});
  REQUIRE(m.size() == 2);
  REQUIRE(m.atoms()[0] == Point{0.0});
  REQUIRE(m.weights()[0] == Catch::Approx(0.5));
  REQUIRE(m.weights()[1] == Catch::Approx(0.5));

  // Dedup is idempotent.
  DiscreteMeasure again(m.atoms(), m.weights());
  REQUIRE(again == m);
}

TEST_CASE("measure construction validates") {
  REQUIRE_THROWS_AS(DiscreteMeasure({{0.0}}, {0.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(DiscreteMeasure({{0.0}, {1.0}}, {1.5, -0.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(DiscreteMeasure::from_samples({}), std::invalid_argument);
  // Zero-weight atoms are dropped.
  DiscreteMeasure m({{0.0}, {1.0}}, {1.0, 0.0});
  REQUIRE(m.size() == 1);
}

TEST_CASE("marginalize product measure returns the factor") {
  // Product of two 2-atom uniforms.
  JointMeasure j({1, 1}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0.25, 0.25, 0.25, 0.25});
  DiscreteMeasure m0 = marginalize(j, 0);
  REQUIRE(m0.size() == 2);
  REQUIRE(m0.weights()[0] == Catch::Approx(0.5));
  REQUIRE(m0.weights()[1] == Catch::Approx(0.5));
  REQUIRE_THROWS_AS(marginalize(j, 2), std::out_of_range);
}

TEST_CASE("marginalize hand-summed 3-atom joint") {
  JointMeasure j({1, 1}, {{0, 0}, {0, 1}, {1, 1}}, {0.5, 0.25, 0.25});
  DiscreteMeasure m0 = marginalize(j, 0);
  REQUIRE(m0.atoms() == std::vector<Point>{{0.0}, {1.0}});
  REQUIRE(m0.weights()[0] == Catch::Approx(0.75));
  REQUIRE(m0.weights()[1] == Catch::Approx(0.25));
}

TEST_CASE("empirical_from_samples counts duplicates") {
  JointMeasure j = empirical_from_samples({{0, 0}, {0, 0}, {1, 1}, {1, 0}});
  REQUIRE(j.size() == 3);
  REQUIRE(j.weights()[0] == Catch::Approx(0.5));   // (0,0)
  REQUIRE(j.weights()[1] == Catch::Approx(0.25));  // (1,0)
  double total = 0.0;
  for (double w : j.weights()) total += w;
  REQUIRE(total == Catch::Approx(1.0));

  JointMeasure dirac = empirical_from_samples({{3, 7}});
  REQUIRE(dirac.size() == 1);
  REQUIRE(dirac.weights()[0] == 1.0);
}

TEST_CASE("empirical then marginalize commutes with projecting rows first") {
  std::vector<Point> rows = {{0, 2}, {1, 2}, {0, 3}, {0, 2}, {1, 3}};
  JointMeasure j = empirical_from_samples(rows);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    std::vector<Point> proj;
    for (const auto& r : rows) proj.push_back({r[axis]});
    DiscreteMeasure direct = DiscreteMeasure::from_samples(proj);
    REQUIRE(marginalize(j, axis) == direct);
  }
}

TEST_CASE("product cost matches the separable metric") {
  CostSpec c2 = CostSpec::uniform(2, Metric::Euclidean, 2.0);
  std::vector<std::size_t> dims{1, 1};
  Point x{0.0, 0.0}, z{3.0, 4.0};
  REQUIRE(c2.product_cost(x, z, dims) == Catch::Approx(5.0));
  REQUIRE(c2.product_cost(x, x, dims) == 0.0);

  CostSpec c1 = CostSpec::uniform(3, Metric::AbsDiff, 1.0);
  std::vector<std::size_t> dims3{1, 1, 1};
  Point a{1, 2, 3}, b{2, 4, 5}, short_pt{1, 2};
  REQUIRE(c1.product_cost(a, b, dims3) == Catch::Approx(5.0));

  REQUIRE_THROWS_AS(c1.product_cost(short_pt, b, dims3), std::invalid_argument);
}

TEST_CASE("product cost is a metric on random triples") {
  Rng rng(7);
  for (double p : {1.0, 2.0, 3.0}) {
    CostSpec cost({{Metric::AbsDiff, {}}, {Metric::Discrete01, {}}}, p);
    std::vector<std::size_t> dims{1, 1};
    for (int trial = 0; trial < 200; ++trial) {
      auto pt = [&]() -> Point {
        return {static_cast<double>(rng.below(5)), static_cast<double>(rng.below(3))};
      };
      Point a = pt(), b = pt(), c = pt();
      const double dab = cost.product_cost(a, b, dims);
      const double dbc = cost.product_cost(b, c, dims);
      const double dac = cost.product_cost(a, c, dims);
      REQUIRE(dab >= 0.0);
      REQUIRE(dab == Catch::Approx(cost.product_cost(b, a, dims)));
      REQUIRE(dac <= dab + dbc + 1e-12);
      if (a == b) REQUIRE(dab == 0.0);
      if (dab == 0.0) REQUIRE(a == b);
    }
  }
}

TEST_CASE("discrete and matrix metrics") {
  CoordMetric disc{Metric::Discrete01, {}};
  REQUIRE(disc.distance(Point{2.0}, Point{2.0}) == 0.0);
  REQUIRE(disc.distance(Point{2.0}, Point{3.0}) == 1.0);

  CoordMetric mat{Metric::Matrix, {{0, 1, 4}, {1, 0, 2}, {4, 2, 0}}};
  REQUIRE(mat.distance(Point{0.0}, Point{2.0}) == 4.0);
  REQUIRE_THROWS_AS(mat.distance(Point{0.0}, Point{5.0}), std::out_of_range);
}

TEST_CASE("marginal system conformability") {
  JointMeasure j = empirical_from_samples({{0, 0}, {1, 1}});
  MarginalSystem sys = MarginalSystem::of_joint(j);
  REQUIRE(sys.num_coords() == 2);
  REQUIRE_NOTHROW(sys.check_conformable(j));
  double total = 0.0;
  for (double w : sys.coord(0).weights()) total += w;
  REQUIRE(total == Catch::Approx(1.0));
}

TEST_CASE("pruning renormalizes and stays explicit") {
  DiscreteMeasure m({{0.0}, {1.0}, {2.0}}, {0.5, 0.5 - 1e-13, 1e-13});
  REQUIRE(m.size() == 3);  // tiny weights kept at construction
  DiscreteMeasure p = m.pruned(1e-6);
  REQUIRE(p.size() == 2);
  double total = 0.0;
  for (double w : p.weights()) total += w;
  REQUIRE(total == Catch::Approx(1.0));
}
