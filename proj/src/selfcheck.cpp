#include "watl/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "watl/config.hpp"
#include "watl/frechet.hpp"
#include "watl/normal.hpp"
#include "watl/rng.hpp"
#include "watl/simulation.hpp"
#include "watl/transfer.hpp"
#include "watl/wasserstein.hpp"

namespace watl::selfcheck {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double weighted_sq_norm(std::span<const double> v,
                        std::span<const double> w) {
  double acc = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) acc += w[j] * v[j] * v[j];
  return acc;
}

std::vector<double> random_values(Rng& rng, std::size_t m, double scale) {
  std::vector<double> v(m);
  for (double& x : v)
    x = scale * normal_quantile(rng.uniform_open());
  return v;
}

std::vector<double> random_monotone(Rng& rng, std::size_t m, double scale) {
  std::vector<double> v = random_values(rng, m, scale);
  std::sort(v.begin(), v.end());
  return v;
}

GridPtr random_grid(Rng& rng, std::size_t m) {
  std::vector<double> nodes(m), weights(m);
  for (double& u : nodes) u = rng.uniform_open();
  std::sort(nodes.begin(), nodes.end());
  for (std::size_t j = 1; j < m; ++j)
    if (nodes[j] <= nodes[j - 1]) nodes[j] = std::nextafter(nodes[j - 1], 1.0);
  double sum = 0.0;
  for (double& w : weights) {
    w = 0.05 + rng.uniform_open();
    sum += w;
  }
  for (double& w : weights) w /= sum;
  // Renormalize exactly enough for the 1e-12 constructor tolerance.
  double s2 = std::accumulate(weights.begin(), weights.end(), 0.0);
  weights.back() += 1.0 - s2;
  return std::make_shared<const ProbGrid>(std::move(nodes), std::move(weights));
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace

std::vector<double> monotone_projection_oracle(std::span<const double> values,
                                               std::span<const double> weights,
                                               double lo, double hi) {
  const std::size_t m = values.size();
  if (m == 0 || m > 20)
    throw std::invalid_argument("monotone_projection_oracle: need 1 <= M <= 20");
  if (weights.size() != m)
    throw std::invalid_argument("monotone_projection_oracle: size mismatch");

  std::vector<double> best;
  double best_obj = kInf;
  std::vector<double> candidate(m);
  const std::uint64_t masks = 1ULL << (m - 1);
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    // Bit b set means a block boundary between positions b and b+1.
    std::size_t start = 0;
    bool feasible = true;
    double prev = -kInf;
    for (std::size_t b = 0; b <= m - 1 && feasible; ++b) {
      const bool boundary = (b == m - 1) || ((mask >> b) & 1ULL);
      if (!boundary) continue;
      double wsum = 0.0, wvsum = 0.0;
      for (std::size_t i = start; i <= b; ++i) {
        wsum += weights[i];
        wvsum += weights[i] * values[i];
      }
      double level = std::clamp(wvsum / wsum, lo, hi);
      if (level < prev) {
        feasible = false;
        break;
      }
      for (std::size_t i = start; i <= b; ++i) candidate[i] = level;
      prev = level;
      start = b + 1;
    }
    if (!feasible) continue;
    double obj = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double d = candidate[i] - values[i];
      obj += weights[i] * d * d;
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = candidate;
    }
  }
  return best;
}

double prox_objective(std::span<const double> g,
                      const GridFunction& target_estimate,
                      const GridFunction& aggregate, double lambda) {
  const auto& w = target_estimate.grid().weights();
  double fit = 0.0, pen = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    double df = g[j] - target_estimate.values()[j];
    double dp = g[j] - aggregate.values()[j];
    fit += w[j] * df * df;
    pen += w[j] * dp * dp;
  }
  return fit + lambda * std::sqrt(pen);
}

std::vector<double> prox_oracle(const GridFunction& target_estimate,
                                const GridFunction& aggregate, double lambda) {
  const auto& w = target_estimate.grid().weights();
  const std::size_t m = target_estimate.size();
  std::vector<double> d(m);
  for (std::size_t j = 0; j < m; ++j)
    d[j] = target_estimate.values()[j] - aggregate.values()[j];
  const double r = std::sqrt(weighted_sq_norm(d, w));

  auto phi = [&](double t) {
    return (t - 1.0) * (t - 1.0) * r * r + lambda * t * r;
  };
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 1.0;
  double c = b - gr * (b - a), e = a + gr * (b - a);
  double fc = phi(c), fe = phi(e);
  for (int it = 0; it < 200 && (b - a) > 1e-14; ++it) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - gr * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + gr * (b - a);
      fe = phi(e);
    }
  }
  const double t = (a + b) / 2.0;
  std::vector<double> g(m);
  for (std::size_t j = 0; j < m; ++j)
    g[j] = aggregate.values()[j] + t * d[j];
  return g;
}

namespace {

CheckResult check_grid_invariants(Rng& rng, bool inject) {
  CheckResult res{"grid-invariants", true, ""};
  GridPtr grid = make_grid(16);
  for (std::size_t j = 0; j < grid->size(); ++j) {
    double u = grid->nodes()[j];
    if (!(u > 0.0 && u < 1.0) || (j > 0 && u <= grid->nodes()[j - 1])) {
      res.ok = false;
      res.detail = "grid nodes must be strictly increasing inside (0,1)";
      return res;
    }
  }
  std::vector<double> values = random_monotone(rng, 16, 1.0);
  if (inject) std::swap(values[3], values[12]);
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] < values[j - 1]) {
      res.ok = false;
      res.detail = "quantile values must be monotone nondecreasing";
      return res;
    }
  }
  return res;
}

CheckResult check_metric_identities(Rng& rng) {
  CheckResult res{"metric-identities", true, ""};
  GridPtr grid = make_grid(64);
  for (int trial = 0; trial < 50; ++trial) {
    QuantileGrid a(grid, random_monotone(rng, 64, 1.0));
    QuantileGrid b(grid, random_monotone(rng, 64, 1.0));
    QuantileGrid c(grid, random_monotone(rng, 64, 1.0));
    double ab = wasserstein_distance(a, b);
    double ba = wasserstein_distance(b, a);
    double aa = wasserstein_distance(a, a);
    double ac = wasserstein_distance(a, c);
    double cb = wasserstein_distance(c, b);
    if (ab != ba || aa != 0.0 || ab > ac + cb + 1e-12) {
      res.ok = false;
      res.detail = "metric axiom violated on random monotone triple";
      return res;
    }
  }
  return res;
}

CheckResult check_weight_identities(Rng& rng) {
  CheckResult res{"weight-identities", true, ""};
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng.uniform_index(80);
    const std::size_t p = 1 + rng.uniform_index(4);
    std::vector<double> data(n * p);
    for (double& v : data) v = normal_quantile(rng.uniform_open());
    CovariateMatrix x(n, p, std::move(data));
    std::vector<double> q(p);
    for (double& v : q) v = normal_quantile(rng.uniform_open());
    std::vector<double> w = global_weights(x, q);
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (std::abs(sum - static_cast<double>(n)) > 1e-8 * static_cast<double>(n)) {
      res.ok = false;
      res.detail = "global weight sum deviates: " + fmt(sum - double(n));
      return res;
    }
  }
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30 + rng.uniform_index(70);
    std::vector<double> data(n);
    for (double& v : data) v = rng.uniform_open();
    CovariateMatrix x(n, 1, std::move(data));
    KernelSpec kernel{trial % 2 == 0 ? KernelFamily::gaussian
                                     : KernelFamily::epanechnikov,
                      0.2 + 0.3 * rng.uniform_open()};
    std::vector<double> w = local_weights(x, 0.3 + 0.4 * rng.uniform_open(),
                                          kernel);
    double mean = std::accumulate(w.begin(), w.end(), 0.0) /
                  static_cast<double>(n);
    if (std::abs(mean - 1.0) > 1e-8) {
      res.ok = false;
      res.detail = "local weight mean deviates: " + fmt(mean - 1.0);
      return res;
    }
  }
  return res;
}

CheckResult check_prox_oracle(Rng& rng) {
  CheckResult res{"prox-oracle", true, ""};
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 8 + rng.uniform_index(57);
    GridPtr grid = make_grid(m);
    GridFunction target(grid, random_values(rng, m, 1.0));
    GridFunction aggregate(grid, random_values(rng, m, 1.0));
    const double lambda = 3.0 * rng.uniform01();

    GridFunction impl = bias_correct(target, aggregate, lambda);
    std::vector<double> oracle = prox_oracle(target, aggregate, lambda);
    double diff = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double d = impl.values()[j] - oracle[j];
      diff += grid->weights()[j] * d * d;
    }
    if (std::sqrt(diff) > 1e-6) {
      res.ok = false;
      res.detail = "closed form deviates from golden-section oracle by " +
                   fmt(std::sqrt(diff));
      return res;
    }

    const double at_min =
        prox_objective(impl.values(), target, aggregate, lambda);
    for (int pert = 0; pert < 5; ++pert) {
      std::vector<double> p = random_values(rng, m, 1.0);
      double norm = std::sqrt(weighted_sq_norm(p, grid->weights()));
      std::vector<double> g(m);
      for (std::size_t j = 0; j < m; ++j)
        g[j] = impl.values()[j] + 1e-3 * p[j] / norm;
      if (prox_objective(g, target, aggregate, lambda) < at_min) {
        res.ok = false;
        res.detail = "off-segment perturbation decreased the objective";
        return res;
      }
    }
  }
  return res;
}

CheckResult check_projection_oracle(Rng& rng) {
  CheckResult res{"projection-oracle", true, ""};
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 2 + rng.uniform_index(11);
    GridPtr grid = random_grid(rng, m);
    GridFunction g(grid, random_values(rng, m, 1.0));
    double lo = -kInf, hi = kInf;
    if (trial % 2 == 1) {
      lo = -0.5;
      hi = 0.75;
    }
    QuantileGrid impl = project_to_quantile(g, lo, hi);
    std::vector<double> oracle = monotone_projection_oracle(
        g.values(), grid->weights(), lo, hi);
    for (std::size_t j = 0; j < m; ++j) {
      if (std::abs(impl.values()[j] - oracle[j]) > 1e-8) {
        res.ok = false;
        res.detail = "projection deviates from brute-force solve at node " +
                     std::to_string(j);
        return res;
      }
    }
  }
  return res;
}

CheckResult check_pipeline_degeneracy(std::uint64_t seed) {
  CheckResult res{"pipeline-degeneracy", true, ""};
  GridPtr grid = make_grid(40);
  Study target = generate_study(0, 0.0, 30, seed, grid);
  TransferConfig cfg;
  cfg.grid_size = 40;
  std::vector<double> x{0.4};

  QuantileGrid base = baseline_predict(target, x, cfg);
  for (double lambda : {0.0, 3.0}) {
    TransferConfig run = cfg;
    run.lambda = lambda;
    FitReport rep = watl_predict(target, {}, x, run);
    for (std::size_t j = 0; j < base.size(); ++j) {
      if (std::abs(rep.prediction.values()[j] - base.values()[j]) > 1e-12) {
        res.ok = false;
        res.detail = "no-source fit deviates from the plain baseline";
        return res;
      }
    }
  }

  std::vector<Study> copies{generate_study(1, 0.0, 30, seed, grid),
                            generate_study(2, 0.0, 30, seed, grid)};
  TransferConfig run = cfg;
  run.lambda = 0.0;
  FitReport rep = watl_predict(target, copies, x, run);
  for (std::size_t j = 0; j < base.size(); ++j) {
    if (std::abs(rep.prediction.values()[j] - base.values()[j]) > 1e-12) {
      res.ok = false;
      res.detail = "identical-copy sources with lambda 0 changed the fit";
      return res;
    }
  }

  run.lambda = 1.0;
  run.informative_count = copies.size();
  FitReport full = watl_predict(target, copies, x, run);
  FitReport adaptive = awatl_predict(target, copies, x, run);
  if (full.prediction.values() != adaptive.prediction.values()) {
    res.ok = false;
    res.detail = "adaptive fit with L = K deviates from the full fit";
    return res;
  }
  return res;
}

CheckResult check_simulation_smoke(std::uint64_t seed) {
  CheckResult res{"simulation-smoke", true, ""};
  SimConfig cfg;
  cfg.num_sources = 2;
  cfg.n0 = 40;
  cfg.source_sizes = {30, 30};
  cfg.psi = {0.1, 0.4};
  cfg.reps = 2;
  cfg.n_eval = 10;
  cfg.seed = seed;
  cfg.grid_size = 50;
  cfg.lambda = 0.5;
  cfg.informative_count = 1;
  cfg.estimators = {Estimator::watl, Estimator::awatl, Estimator::only_target,
                    Estimator::only_source, Estimator::pooled};
  ExperimentReport a = run_experiment(cfg);
  ExperimentReport b = run_experiment(cfg);
  for (const auto& summary : a.summaries) {
    if (!std::isfinite(summary.mean_rmspr) || summary.mean_rmspr < 0.0) {
      res.ok = false;
      res.detail = "non-finite RMSPR in smoke run";
      return res;
    }
  }
  for (std::size_t r = 0; r < a.records.size(); ++r) {
    if (a.records[r].rmspr != b.records[r].rmspr) {
      res.ok = false;
      res.detail = "identical seeds produced different replication results";
      return res;
    }
  }
  for (double rate : a.selection_rates) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
      res.ok = false;
      res.detail = "selection rate outside [0,1]";
      return res;
    }
  }
  return res;
}

}  // namespace

std::vector<CheckResult> run_fast_checks(const FastCheckOptions& options) {
  Rng rng(options.seed);
  std::vector<CheckResult> results;
  results.push_back(check_grid_invariants(rng, options.inject_grid_fault));
  results.push_back(check_metric_identities(rng));
  results.push_back(check_weight_identities(rng));
  results.push_back(check_prox_oracle(rng));
  results.push_back(check_projection_oracle(rng));
  results.push_back(check_pipeline_degeneracy(options.seed));
  results.push_back(check_simulation_smoke(options.seed));
  return results;
}

}  // namespace watl::selfcheck
