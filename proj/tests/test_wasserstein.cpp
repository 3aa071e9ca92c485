#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "oracles.hpp"
#include "watl/normal.hpp"
#include "watl/rng.hpp"
#include "watl/selfcheck.hpp"
#include "watl/wasserstein.hpp"

using namespace watl;

namespace {

QuantileGrid constant_q(const GridPtr& grid, double c) {
  return QuantileGrid(grid, std::vector<double>(grid->size(), c));
}

QuantileGrid linear_q(const GridPtr& grid, double a) {
  std::vector<double> v(grid->size());
  for (std::size_t j = 0; j < grid->size(); ++j) v[j] = a * grid->nodes()[j];
  return QuantileGrid(grid, std::move(v));
}

}  // namespace

TEST_CASE("l2 distance basics") {
  GridPtr grid = make_grid(16);
  GridFunction f(grid, std::vector<double>(16, 0.0));
  GridFunction g(grid, std::vector<double>(16, 1.0));
  CHECK(l2_distance(f, f) == 0.0);
  CHECK(l2_distance(f, g) == doctest::Approx(1.0).epsilon(1e-14));

  GridPtr other = make_grid(17);
  GridFunction h(other, std::vector<double>(17, 0.0));
  CHECK_THROWS_AS(l2_distance(f, h), std::invalid_argument);
}

TEST_CASE("quadrature accuracy: ||u - 2u|| -> 1/sqrt(3)") {
  const double exact = 1.0 / std::sqrt(3.0);
  double prev_err = 1.0;
  for (std::size_t m : {100, 1000, 10000}) {
    GridPtr grid = make_grid(m);
    double d = wasserstein_distance(linear_q(grid, 1.0), linear_q(grid, 2.0));
    double err = std::abs(d - exact);
    CHECK(err < prev_err);  // midpoint-rule error shrinks with M
    prev_err = err;
    if (m == 1000) CHECK(d == doctest::Approx(exact).epsilon(1e-3));
  }
}

TEST_CASE("wasserstein distance: point masses and translations") {
  GridPtr grid = make_grid(32);
  CHECK(wasserstein_distance(constant_q(grid, 2.0), constant_q(grid, -1.5)) ==
        doctest::Approx(3.5).epsilon(1e-14));

  Rng rng(42);
  std::vector<double> base = testutil::random_monotone(rng, 32);
  std::vector<double> shifted = base;
  for (double& x : shifted) x += 0.75;
  CHECK(wasserstein_distance(QuantileGrid(grid, base),
                             QuantileGrid(grid, shifted)) ==
        doctest::Approx(0.75).epsilon(1e-12));

  GridPtr fine = make_grid(1000);
  CHECK(wasserstein_distance(linear_q(fine, 1.0), linear_q(fine, 2.0)) ==
        doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-3));
}

TEST_CASE("metric axioms on random monotone triples") {
  GridPtr grid = make_grid(48);
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    QuantileGrid a(grid, testutil::random_monotone(rng, 48));
    QuantileGrid b(grid, testutil::random_monotone(rng, 48));
    QuantileGrid c(grid, testutil::random_monotone(rng, 48));
    CHECK(wasserstein_distance(a, b) == wasserstein_distance(b, a));
    CHECK(wasserstein_distance(a, a) == 0.0);
    CHECK(wasserstein_distance(a, b) <=
          wasserstein_distance(a, c) + wasserstein_distance(c, b) + 1e-12);
  }
}

TEST_CASE("frechet mean: identity, averages, translated copies") {
  GridPtr grid = make_grid(24);
  Rng rng(11);
  QuantileGrid q(grid, testutil::random_monotone(rng, 24));

  std::vector<double> one{1.0};
  GridFunction same = frechet_mean({q}, one);
  CHECK(testutil::max_abs_diff(same.values(), q.values()) == 0.0);

  std::vector<double> equal{1.0, 1.0};
  GridFunction mid =
      frechet_mean({constant_q(grid, 1.0), constant_q(grid, 4.0)}, equal);
  for (double v : mid.values()) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));

  // translated copies against a direct double-loop summation
  std::vector<QuantileGrid> copies;
  std::vector<double> shifts{-0.5, 0.25, 1.0, 2.0};
  std::vector<double> w(shifts.size(), 1.0);
  for (double c : shifts) {
    std::vector<double> v = q.values();
    for (double& x : v) x += c;
    copies.emplace_back(grid, std::move(v));
  }
  GridFunction mean = frechet_mean(copies, w);
  for (std::size_t j = 0; j < mean.size(); ++j) {
    double direct = 0.0;
    for (std::size_t i = 0; i < copies.size(); ++i)
      direct += copies[i].values()[j];
    direct /= static_cast<double>(copies.size());
    CHECK(mean.values()[j] == doctest::Approx(direct).epsilon(1e-15));
  }

  CHECK_THROWS_AS(frechet_mean({}, {}), std::invalid_argument);
  std::vector<double> zero{1.0, -1.0};
  CHECK_THROWS_AS(frechet_mean({q, q}, zero), std::invalid_argument);
}

TEST_CASE("frechet mean with nonnegative weights stays monotone") {
  GridPtr grid = make_grid(20);
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<QuantileGrid> qs;
    std::vector<double> w;
    for (int i = 0; i < 4; ++i) {
      qs.emplace_back(grid, testutil::random_monotone(rng, 20));
      w.push_back(rng.uniform_open());
    }
    GridFunction mean = frechet_mean(qs, w);
    for (std::size_t j = 1; j < mean.size(); ++j)
      CHECK(mean.values()[j] >= mean.values()[j - 1]);
  }
}

TEST_CASE("projection: fixed points and pooled examples") {
  GridPtr grid3 = std::make_shared<const ProbGrid>(
      std::vector<double>{0.25, 0.5, 0.75},
      std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});

  GridFunction g(grid3, {3.0, 1.0, 2.0});
  QuantileGrid proj = project_to_quantile(g);
  CHECK(proj.values() == std::vector<double>{2.0, 2.0, 2.0});

  // strictly decreasing input pools to the mean
  GridFunction dec(grid3, {5.0, 3.0, 1.0});
  QuantileGrid pooled = project_to_quantile(dec);
  for (double v : pooled.values())
    CHECK(v == doctest::Approx(3.0).epsilon(1e-15));

  // already-monotone input is untouched; projection is idempotent
  Rng rng(17);
  GridPtr grid = make_grid(40);
  std::vector<double> mono = testutil::random_monotone(rng, 40);
  QuantileGrid p1 = project_to_quantile(GridFunction(grid, mono));
  CHECK(p1.values() == mono);
  QuantileGrid p2 = project_to_quantile(p1.to_function());
  CHECK(p2.values() == p1.values());

  QuantileGrid p3 =
      project_to_quantile(GridFunction(grid, testutil::random_values(rng, 40)));
  QuantileGrid p4 = project_to_quantile(p3.to_function());
  CHECK(p4.values() == p3.values());

  CHECK_THROWS_AS(project_to_quantile(g, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("projection matches the brute-force QP oracle") {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + rng.uniform_index(11);
    // random grid with nonuniform weights to exercise weighted pooling
    std::vector<double> nodes(m), weights(m);
    for (double& u : nodes) u = rng.uniform_open();
    std::sort(nodes.begin(), nodes.end());
    for (std::size_t j = 1; j < m; ++j)
      if (nodes[j] <= nodes[j - 1])
        nodes[j] = std::nextafter(nodes[j - 1], 1.0);
    double sum = 0.0;
    for (double& w : weights) {
      w = 0.05 + rng.uniform_open();
      sum += w;
    }
    for (double& w : weights) w /= sum;
    double s2 = std::accumulate(weights.begin(), weights.end(), 0.0);
    weights.back() += 1.0 - s2;
    auto grid = std::make_shared<const ProbGrid>(nodes, weights);

    GridFunction g(grid, testutil::random_values(rng, m));
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    if (trial % 2 == 1) {
      lo = -0.4;
      hi = 0.9;
    }
    QuantileGrid impl = project_to_quantile(g, lo, hi);
    std::vector<double> oracle = selfcheck::monotone_projection_oracle(
        g.values(), grid->weights(), lo, hi);
    CHECK(testutil::max_abs_diff(impl.values(), oracle) < 1e-8);
  }
}

TEST_CASE("projection never moves away from monotone vectors") {
  // obtuse-angle property of projections onto convex sets
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 3 + rng.uniform_index(9);
    GridPtr grid = make_grid(m);
    GridFunction g(grid, testutil::random_values(rng, m));
    QuantileGrid proj = project_to_quantile(g);
    QuantileGrid target(grid, testutil::random_monotone(rng, m));
    CHECK(l2_distance(proj.to_function(), target.to_function()) <=
          l2_distance(g, target.to_function()) + 1e-12);
  }
}

TEST_CASE("empirical quantiles: order-statistic convention") {
  GridPtr grid = make_grid(4);
  QuantileGrid single = quantile_from_samples({5.0}, grid);
  for (double v : single.values()) CHECK(v == 5.0);

  // nodes 0.125, 0.375, 0.625, 0.875 with N = 2: ceil(u*2) = 1, 1, 2, 2
  QuantileGrid two = quantile_from_samples({2.0, 1.0}, grid);
  CHECK(two.values() == std::vector<double>{1.0, 1.0, 2.0, 2.0});

  GridPtr grid2 = std::make_shared<const ProbGrid>(
      std::vector<double>{0.25, 0.75}, std::vector<double>{0.5, 0.5});
  QuantileGrid q2 = quantile_from_samples({1.0, 2.0}, grid2);
  CHECK(q2.values() == std::vector<double>{1.0, 2.0});

  CHECK_THROWS_AS(quantile_from_samples({}, grid), std::invalid_argument);
}

TEST_CASE("empirical quantiles are monotone under random input") {
  Rng rng(29);
  GridPtr grid = make_grid(64);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> ys(1 + rng.uniform_index(200));
    for (double& y : ys) y = normal_quantile(rng.uniform_open());
    QuantileGrid q = quantile_from_samples(ys, grid);  // ctor enforces
    for (std::size_t j = 1; j < q.size(); ++j)
      CHECK(q.values()[j] >= q.values()[j - 1]);
  }
}

TEST_CASE("empirical quantiles converge to the population quantile") {
  // N(0,1) samples vs the exact normal quantile grid at M = 500
  GridPtr grid = make_grid(500);
  std::vector<double> exact(grid->size());
  for (std::size_t j = 0; j < grid->size(); ++j)
    exact[j] = normal_quantile(grid->nodes()[j]);
  QuantileGrid truth(grid, exact);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(1000 + seed);
    std::vector<double> ys(100000);
    for (double& y : ys) y = normal_quantile(rng.uniform_open());
    QuantileGrid emp = quantile_from_samples(std::move(ys), grid);
    CHECK(wasserstein_distance(emp, truth) < 0.02);
  }
}
