#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "watl/frechet.hpp"
#include "watl/rng.hpp"
#include "watl/selfcheck.hpp"
#include "watl/simulation.hpp"
#include "watl/transfer.hpp"

using namespace watl;

namespace {

GridFunction constant_fn(const GridPtr& grid, double c) {
  return GridFunction(grid, std::vector<double>(grid->size(), c));
}

}  // namespace

TEST_CASE("bias correction: trivial and closed-form cases") {
  GridPtr grid = make_grid(12);
  Rng rng(61);
  GridFunction target(grid, testutil::random_values(rng, 12));
  GridFunction aggregate(grid, testutil::random_values(rng, 12));

  GridFunction off = bias_correct(target, aggregate, 0.0);
  CHECK(off.values() == target.values());

  GridFunction same = bias_correct(target, target, 2.5);
  CHECK(same.values() == target.values());

  // r = 1, lambda = 1: midpoint; lambda >= 2: collapse to the aggregate
  GridFunction zero = constant_fn(grid, 0.0);
  GridFunction unit = constant_fn(grid, 1.0);  // ||unit - zero|| = 1
  GridFunction mid = bias_correct(unit, zero, 1.0);
  for (double v : mid.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  GridFunction snapped = bias_correct(unit, zero, 2.0);
  CHECK(snapped.values() == zero.values());
  GridFunction snapped2 = bias_correct(unit, zero, 3.7);
  CHECK(snapped2.values() == zero.values());

  GridPtr other = make_grid(13);
  CHECK_THROWS_AS(
      bias_correct(target, constant_fn(other, 0.0), 1.0),
      std::invalid_argument);
  CHECK_THROWS_AS(bias_correct(target, aggregate, -0.1), std::invalid_argument);
}

TEST_CASE("bias correction matches the golden-section oracle") {
  Rng rng(67);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 8 + rng.uniform_index(57);
    GridPtr grid = make_grid(m);
    GridFunction target(grid, testutil::random_values(rng, m));
    GridFunction aggregate(grid, testutil::random_values(rng, m));
    const double lambda = 3.0 * rng.uniform01();

    GridFunction impl = bias_correct(target, aggregate, lambda);
    std::vector<double> oracle = selfcheck::prox_oracle(target, aggregate, lambda);
    double diff = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double d = impl.values()[j] - oracle[j];
      diff += grid->weights()[j] * d * d;
    }
    CHECK(std::sqrt(diff) < 1e-6);

    // off-segment perturbations never decrease the objective
    const double at_min =
        selfcheck::prox_objective(impl.values(), target, aggregate, lambda);
    for (int pert = 0; pert < 5; ++pert) {
      std::vector<double> p = testutil::random_values(rng, m);
      double norm = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        norm += grid->weights()[j] * p[j] * p[j];
      norm = std::sqrt(norm);
      std::vector<double> g(m);
      for (std::size_t j = 0; j < m; ++j)
        g[j] = impl.values()[j] + 1e-3 * p[j] / norm;
      CHECK(selfcheck::prox_objective(g, target, aggregate, lambda) >= at_min);
    }
  }
}

TEST_CASE("bias correction invariants: segment, contraction, shrinkage") {
  Rng rng(71);
  GridPtr grid = make_grid(20);
  for (int trial = 0; trial < 50; ++trial) {
    GridFunction target(grid, testutil::random_values(rng, 20));
    GridFunction aggregate(grid, testutil::random_values(rng, 20));
    double lambda = 3.0 * rng.uniform01();

    // output lies on the segment [aggregate, target]
    GridFunction out = bias_correct(target, aggregate, lambda);
    double r = l2_distance(target, aggregate);
    double to_agg = l2_distance(out, aggregate);
    double to_tgt = l2_distance(out, target);
    CHECK(to_agg + to_tgt == doctest::Approx(r).epsilon(1e-9));

    // 1-Lipschitz in the target estimate
    GridFunction target2(grid, testutil::random_values(rng, 20));
    GridFunction out2 = bias_correct(target2, aggregate, lambda);
    CHECK(l2_distance(out, out2) <=
          l2_distance(target, target2) * (1.0 + 1e-12) + 1e-15);

    // larger lambda pulls at least as close to the aggregate
    double lambda2 = lambda + 2.0 * rng.uniform01();
    GridFunction out3 = bias_correct(target, aggregate, lambda2);
    CHECK(l2_distance(out3, aggregate) <= to_agg + 1e-12);
  }
}

TEST_CASE("informative-set selection") {
  std::vector<double> scores{0.3, 0.1, 0.2};
  CHECK(select_informative(scores, 0).empty());
  CHECK(select_informative(scores, 2) == std::vector<std::size_t>{1, 2});
  CHECK(select_informative(scores, 3) == std::vector<std::size_t>{0, 1, 2});

  std::vector<double> tied{0.1, 0.1, 0.5};
  CHECK(select_informative(tied, 1) == std::vector<std::size_t>{0});

  CHECK_THROWS_AS(select_informative(scores, 4), std::invalid_argument);

  // permutation equivariance away from ties
  Rng rng(73);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s(6);
    for (double& v : s) v = rng.uniform_open();
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle_indices(perm, rng);
    std::vector<double> sp(6);
    for (std::size_t i = 0; i < 6; ++i) sp[perm[i]] = s[i];
    auto sel = select_informative(s, 3);
    auto selp = select_informative(sp, 3);
    std::vector<std::size_t> mapped;
    for (std::size_t i : sel) mapped.push_back(perm[i]);
    std::sort(mapped.begin(), mapped.end());
    CHECK(mapped == selp);
  }
}

TEST_CASE("discrepancy scores: copies, shifts, rank correlation") {
  GridPtr grid = make_grid(50);
  Study target = generate_study(0, 0.0, 80, 777, grid);
  TransferConfig cfg;
  cfg.grid_size = 50;

  // exact copy scores zero
  Study copy = generate_study(1, 0.0, 80, 777, grid);
  std::vector<Study> single{copy};
  std::vector<double> x{0.42};
  std::vector<double> s = discrepancy_scores(target, single, x, cfg);
  CHECK(s.size() == 1);
  CHECK(s[0] == doctest::Approx(0.0).epsilon(1e-12));

  // shifting every response by c moves the score to |c|
  const double shift = 0.6;
  std::vector<QuantileGrid> shifted;
  for (const QuantileGrid& q : target.responses()) {
    std::vector<double> v = q.values();
    for (double& t : v) t += shift;
    shifted.emplace_back(grid, std::move(v));
  }
  Study moved("shifted", StudyRole::source, target.covariates(), shifted);
  std::vector<Study> mv{moved};
  s = discrepancy_scores(target, mv, x, cfg);
  CHECK(s[0] == doctest::Approx(shift).epsilon(1e-9));

  // Scores track true dissimilarity. At n = 500 the estimation noise in a
  // score is ~3e-3, so only discrepancy differences above that are resolved:
  // the 0.1-spaced parameters (true L2 gaps 6e-4..5.6e-3) give a positive
  // but modest rank correlation, while a well-separated pair is ordered
  // correctly almost always.
  std::vector<double> psis{0.1, 0.2, 0.3, 0.4, 0.5};
  double total_rho = 0.0;
  std::size_t pair_correct = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    Study tgt = generate_study(0, 0.0, 500, 9000 + rep, grid);
    std::vector<Study> sources;
    for (std::size_t k = 0; k < psis.size(); ++k)
      sources.push_back(
          generate_study(k + 1, psis[k], 500, 9500 + rep * 7 + k, grid));
    Rng qrng(31000 + rep);
    std::vector<double> q{0.25 + 0.5 * qrng.uniform_open()};
    total_rho += testutil::spearman(
        discrepancy_scores(tgt, sources, q, cfg), psis);

    std::vector<Study> pair{
        generate_study(1, 0.1, 500, 41000 + rep, grid),
        generate_study(2, 0.9, 500, 42000 + rep, grid)};
    std::vector<double> ps = discrepancy_scores(tgt, pair, q, cfg);
    if (ps[0] < ps[1]) ++pair_correct;
  }
  CHECK(total_rho / reps > 0.05);
  CHECK(pair_correct >= 95);
}

TEST_CASE("pipeline degeneracies") {
  GridPtr grid = make_grid(40);
  Study target = generate_study(0, 0.0, 50, 4242, grid);
  TransferConfig cfg;
  cfg.grid_size = 40;
  std::vector<double> x{0.37};
  QuantileGrid base = baseline_predict(target, x, cfg);

  // no sources: identical to the baseline for any lambda, since the
  // aggregate then equals the target's own estimate
  for (double lambda : {0.0, 0.7, 3.0}) {
    TransferConfig run = cfg;
    run.lambda = lambda;
    FitReport rep = watl_predict(target, {}, x, run);
    CHECK(testutil::max_abs_diff(rep.prediction.values(), base.values()) <=
          1e-12);
    CHECK(rep.discrepancies.empty());
    CHECK(rep.selected.empty());
  }

  // identical-copy sources with lambda = 0
  std::vector<Study> copies{generate_study(1, 0.0, 50, 4242, grid),
                            generate_study(2, 0.0, 50, 4242, grid)};
  TransferConfig run = cfg;
  run.lambda = 0.0;
  FitReport rep = watl_predict(target, copies, x, run);
  CHECK(testutil::max_abs_diff(rep.prediction.values(), base.values()) <=
        1e-12);

  // adaptive with L = K equals the full fit exactly
  run.lambda = 0.9;
  run.informative_count = copies.size();
  FitReport full = watl_predict(target, copies, x, run);
  FitReport adaptive = awatl_predict(target, copies, x, run);
  CHECK(adaptive.prediction.values() == full.prediction.values());
  CHECK(adaptive.selected == std::vector<std::size_t>{0, 1});

  // L = 0 reduces to the target-only pipeline
  run.informative_count = 0;
  FitReport none = awatl_predict(target, copies, x, run);
  CHECK(testutil::max_abs_diff(none.prediction.values(), base.values()) <=
        1e-12);

  run.informative_count = 5;
  CHECK_THROWS_AS(awatl_predict(target, copies, x, run), std::invalid_argument);
}

TEST_CASE("aux estimate: reductions and size weighting") {
  GridPtr grid = make_grid(30);
  TransferConfig cfg;
  cfg.grid_size = 30;
  std::vector<double> x{0.5};

  Study a = generate_study(0, 0.0, 40, 555, grid);
  GridFunction own = aux_estimate({std::cref(a)}, x, cfg);

  // two identical studies: the average equals either term
  Study b = generate_study(1, 0.0, 40, 555, grid);
  GridFunction both = aux_estimate({std::cref(a), std::cref(b)}, x, cfg);
  CHECK(testutil::max_abs_diff(both.values(), own.values()) <= 1e-14);

  // constant responses combine by sample size: (1*c1 + 2*c2 + 3*c3) / 6
  auto constant_study = [&](double c, std::size_t n, const char* label) {
    std::vector<QuantileGrid> qs(
        n, QuantileGrid(grid, std::vector<double>(grid->size(), c)));
    std::vector<double> cov(n);
    for (std::size_t i = 0; i < n; ++i)
      cov[i] = static_cast<double>(i + 1) / static_cast<double>(n + 1);
    return Study(label, StudyRole::source, CovariateMatrix(n, 1, cov), qs);
  };
  Study s1 = constant_study(1.0, 1, "c1");
  Study s2 = constant_study(2.0, 2, "c2");
  Study s3 = constant_study(3.0, 3, "c3");
  GridFunction mix =
      aux_estimate({std::cref(s1), std::cref(s2), std::cref(s3)}, x, cfg);
  for (double v : mix.values())
    CHECK(v == doctest::Approx((1.0 + 4.0 + 9.0) / 6.0).epsilon(1e-12));

  CHECK_THROWS_AS(aux_estimate({}, x, cfg), std::invalid_argument);
}

TEST_CASE("cross validation: singleton grid, determinism, fold sizes") {
  GridPtr grid = make_grid(30);
  Study target = generate_study(0, 0.0, 40, 808, grid);
  std::vector<Study> sources{generate_study(1, 0.2, 60, 809, grid)};

  TransferConfig cfg;
  cfg.grid_size = 30;
  cfg.lambda_grid = {0.5};
  cfg.seed = 99;
  CvResult cv = cross_validate(target, sources, {}, cfg);
  CHECK(cv.lambda == 0.5);
  CHECK(cv.trace.size() == 1);

  cfg.lambda_grid.clear();  // default grid 0..3
  CvResult a = cross_validate(target, sources, {}, cfg);
  CvResult b = cross_validate(target, sources, {}, cfg);
  CHECK(a.lambda == b.lambda);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i)
    CHECK(a.trace[i].score == b.trace[i].score);

  // n0 = 8 with 5 folds leaves folds of size 1
  Study tiny = generate_study(0, 0.0, 8, 810, grid);
  CHECK_THROWS_AS(cross_validate(tiny, sources, {}, cfg),
                  std::invalid_argument);
  cfg.cv_folds = 1;
  CHECK_THROWS_AS(cross_validate(target, sources, {}, cfg),
                  std::invalid_argument);
}

TEST_CASE("cross validation picks a positive lambda with informative sources") {
  GridPtr grid = make_grid(50);
  std::vector<double> psis{0.1, 0.2, 0.3, 0.4, 0.5};
  std::size_t positive = 0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    Study target = generate_study(0, 0.0, 200, 20000 + rep, grid);
    std::vector<Study> sources;
    for (std::size_t k = 0; k < psis.size(); ++k)
      sources.push_back(generate_study(k + 1, psis[k], (k + 1) * 100,
                                       21000 + rep * 11 + k, grid));
    TransferConfig cfg;
    cfg.grid_size = 50;
    cfg.seed = 3000 + rep;
    if (cross_validate(target, sources, {}, cfg).lambda > 0.0) ++positive;
  }
  CHECK(positive >= 40);  // >= 80% of replications
}

TEST_CASE("cross validation over L and bandwidth grids") {
  GridPtr grid = make_grid(30);
  Study target = generate_study(0, 0.0, 60, 313, grid);
  std::vector<Study> sources{generate_study(1, 0.1, 60, 314, grid),
                             generate_study(2, 0.6, 60, 315, grid)};

  TransferConfig cfg;
  cfg.grid_size = 30;
  cfg.lambda_grid = {0.0, 1.0};
  const std::size_t l_grid[] = {0, 1, 2};
  CvResult cv = cross_validate(target, sources, {}, cfg, l_grid);
  REQUIRE(cv.informative_count.has_value());
  CHECK(*cv.informative_count <= 2);
  CHECK(cv.trace.size() == 6);

  // local mode with one degenerate bandwidth: it is traced as +inf and a
  // usable candidate wins
  cfg.mode = RegressionMode::local;
  cfg.kernel = {KernelFamily::epanechnikov, 0.3};
  const double h_grid[] = {1e-6, 0.3};
  CvResult hcv = cross_validate(target, sources, {}, cfg, {}, h_grid);
  REQUIRE(hcv.bandwidth.has_value());
  CHECK(*hcv.bandwidth == 0.3);
  bool saw_inf = false;
  for (const CvPoint& p : hcv.trace)
    if (std::isinf(p.score)) saw_inf = true;
  CHECK(saw_inf);
}

TEST_CASE("shared-set batches use one selection for every query") {
  GridPtr grid = make_grid(30);
  Study target = generate_study(0, 0.0, 60, 901, grid);
  std::vector<Study> sources{generate_study(1, 0.1, 60, 902, grid),
                             generate_study(2, 0.6, 60, 903, grid),
                             generate_study(3, 0.6, 60, 904, grid)};
  TransferConfig cfg;
  cfg.grid_size = 30;
  cfg.lambda = 0.5;
  cfg.informative_count = 1;
  cfg.shared_informative_set = true;
  std::vector<std::vector<double>> queries{{0.1}, {0.5}, {0.9}};
  auto reports = awatl_predict_batch(target, sources, queries, cfg);
  REQUIRE(reports.size() == 3);
  for (const FitReport& r : reports) {
    CHECK(r.selected == reports.front().selected);
    CHECK(r.selected.size() == 1);
  }
}

TEST_CASE("small sources are flagged in diagnostics but kept in the fit") {
  GridPtr grid = make_grid(30);
  Study target = generate_study(0, 0.0, 400, 515, grid);
  std::vector<Study> sources{generate_study(1, 0.1, 5, 516, grid),
                             generate_study(2, 0.1, 400, 517, grid)};
  TransferConfig cfg;
  cfg.grid_size = 30;
  cfg.lambda = 0.5;
  FitReport rep = watl_predict(target, sources, std::vector<double>{0.5}, cfg);
  // n_1 = 5 < sqrt(805); n_2 = 400 is fine
  CHECK(rep.diagnostics.small_sources == std::vector<std::size_t>{0});
  CHECK(rep.selected == std::vector<std::size_t>{0, 1});
}

TEST_CASE("local-mode transfer produces valid predictions") {
  GridPtr grid = make_grid(40);
  Study target = generate_study(0, 0.0, 80, 616, grid);
  std::vector<Study> sources{generate_study(1, 0.2, 100, 617, grid)};
  TransferConfig cfg;
  cfg.grid_size = 40;
  cfg.mode = RegressionMode::local;
  cfg.kernel = {KernelFamily::gaussian, 0.2};
  cfg.lambda = 0.4;
  FitReport rep = watl_predict(target, sources, std::vector<double>{0.5}, cfg);
  for (std::size_t j = 1; j < rep.prediction.size(); ++j)
    CHECK(rep.prediction.values()[j] >= rep.prediction.values()[j - 1]);
  CHECK(std::abs(rep.diagnostics.target_weight_residual) < 1e-8);
}

TEST_CASE("empirical-measure mode approaches the full-distribution fit") {
  GridPtr grid = make_grid(50);
  TransferConfig cfg;
  cfg.grid_size = 50;
  cfg.lambda = 0.5;
  std::vector<double> x{0.45};

  Study target_full = generate_study(0, 0.0, 60, 111, grid);
  std::vector<Study> sources_full{generate_study(1, 0.1, 80, 222, grid)};
  FitReport full = watl_predict(target_full, sources_full, x, cfg);

  double prev_gap = std::numeric_limits<double>::infinity();
  for (std::size_t n_samples : {100, 1000, 10000}) {
    Study target_em = generate_study_em(0, 0.0, 60, n_samples, 111);
    std::vector<Study> sources_em{generate_study_em(1, 0.1, 80, n_samples, 222)};
    FitReport em = watl_predict(target_em, sources_em, x, cfg);
    double gap = l2_distance(em.prediction.to_function(),
                             full.prediction.to_function());
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}
