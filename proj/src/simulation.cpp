#include "watl/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "watl/frechet.hpp"
#include "watl/parallel.hpp"
#include "watl/rng.hpp"
#include "watl/transfer.hpp"
#include "watl/wasserstein.hpp"

namespace watl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kQueryStream = 0;
constexpr std::uint64_t kCvStream = 0xCAFE;

// Z ~ N(0.5, 1 - psi) truncated to (0,1); the similarity parameter shifts
// the latent variance.
double sim_z_variance(double psi) {
  if (!(psi >= 0.0 && psi < 1.0))
    throw std::invalid_argument(
        "simulation: psi must lie in [0, 1) (variance nonpositive otherwise)");
  return 1.0 - psi;
}

// Q_Z on the grid nodes.
std::vector<double> z_quantiles(double psi, const ProbGrid& grid) {
  const double sigma2 = sim_z_variance(psi);
  std::vector<double> q(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    q[j] = truncated_normal_quantile(0.5, sigma2, 0.0, 1.0, grid.nodes()[j]);
  return q;
}

struct RowLatents {
  double x;
  double w;
};

RowLatents draw_row_latents(std::uint64_t study_seed, std::size_t row) {
  Rng rng(substream_seed(study_seed, {row, 0}));
  RowLatents latents{};
  latents.x = rng.uniform_open();
  latents.w = truncated_normal_quantile(0.0, 1.0, -0.5, 0.5, rng.uniform_open());
  return latents;
}

}  // namespace

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::watl: return "watl";
    case Estimator::awatl: return "awatl";
    case Estimator::only_target: return "only_target";
    case Estimator::only_source: return "only_source";
    case Estimator::pooled: return "pooled";
  }
  return "unknown";
}

std::optional<Estimator> estimator_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kEstimatorCount; ++i) {
    Estimator e = static_cast<Estimator>(i);
    if (name == estimator_name(e)) return e;
  }
  return std::nullopt;
}

std::size_t SimConfig::source_size(std::size_t k) const {
  if (k == 0 || k > num_sources)
    throw std::invalid_argument("SimConfig: source index out of range");
  if (!source_sizes.empty()) return source_sizes[k - 1];
  return k * tau;
}

void SimConfig::validate() const {
  if (reps < 1) throw std::invalid_argument("SimConfig: reps must be >= 1");
  if (n0 < 1) throw std::invalid_argument("SimConfig: n0 must be >= 1");
  if (tau < 1 && source_sizes.empty())
    throw std::invalid_argument("SimConfig: tau must be >= 1");
  if (psi.size() != num_sources)
    throw std::invalid_argument("SimConfig: psi list must have K entries");
  for (double p : psi)
    if (!(p >= 0.0 && p < 1.0))
      throw std::invalid_argument("SimConfig: psi entries must lie in [0, 1)");
  if (!source_sizes.empty() && source_sizes.size() != num_sources)
    throw std::invalid_argument("SimConfig: source_sizes must have K entries");
  if (n_eval < 1) throw std::invalid_argument("SimConfig: n_eval must be >= 1");
  if (estimators.empty())
    throw std::invalid_argument("SimConfig: no estimators requested");
  const bool adaptive =
      std::find(estimators.begin(), estimators.end(), Estimator::awatl) !=
      estimators.end();
  if (adaptive && informative_count > num_sources)
    throw std::invalid_argument("SimConfig: L exceeds the source count");
  if (grid_size < 2)
    throw std::invalid_argument("SimConfig: grid_size must be >= 2");
}

std::vector<double> sim_response_values(double x, double w, double psi,
                                        const ProbGrid& grid) {
  std::vector<double> zq = z_quantiles(psi, grid);
  std::vector<double> v(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double u = grid.nodes()[j];
    v[j] = w * (1.0 - u) * u + (1.0 - x) * u + x * zq[j];
  }
  return v;
}

Study generate_study(std::size_t k, double psi, std::size_t n,
                     std::uint64_t seed, const GridPtr& grid) {
  if (n < 1) throw std::invalid_argument("generate_study: n must be >= 1");
  std::vector<double> zq = z_quantiles(psi, *grid);

  std::vector<double> xdata(n);
  std::vector<QuantileGrid> responses;
  responses.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RowLatents latents = draw_row_latents(seed, i);
    xdata[i] = latents.x;
    std::vector<double> v(grid->size());
    for (std::size_t j = 0; j < grid->size(); ++j) {
      const double u = grid->nodes()[j];
      v[j] = latents.w * (1.0 - u) * u + (1.0 - latents.x) * u +
             latents.x * zq[j];
    }
    responses.emplace_back(grid, std::move(v));
  }
  return Study(k == 0 ? "target" : "source_" + std::to_string(k),
               k == 0 ? StudyRole::target : StudyRole::source,
               CovariateMatrix(n, 1, std::move(xdata)), std::move(responses));
}

Study generate_study_em(std::size_t k, double psi, std::size_t n,
                        std::size_t num_samples, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_study_em: n must be >= 1");
  if (num_samples < 1)
    throw std::invalid_argument("generate_study_em: need >= 1 sample per row");

  const double sigma2 = sim_z_variance(psi);
  std::vector<double> xdata(n);
  std::vector<std::vector<double>> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    RowLatents latents = draw_row_latents(seed, i);
    xdata[i] = latents.x;
    Rng srng(substream_seed(seed, {i, 1}));
    samples[i].resize(num_samples);
    for (std::size_t j = 0; j < num_samples; ++j) {
      const double u = srng.uniform_open();
      samples[i][j] =
          latents.w * (1.0 - u) * u + (1.0 - latents.x) * u +
          latents.x * truncated_normal_quantile(0.5, sigma2, 0.0, 1.0, u);
    }
  }
  return Study(k == 0 ? "target" : "source_" + std::to_string(k),
               k == 0 ? StudyRole::target : StudyRole::source,
               CovariateMatrix(n, 1, std::move(xdata)), std::move(samples));
}

QuantileGrid true_regression_quantile(double x, double psi,
                                      const GridPtr& grid) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::invalid_argument("true_regression_quantile: x must lie in [0,1]");
  std::vector<double> zq = z_quantiles(psi, *grid);
  std::vector<double> v(grid->size());
  for (std::size_t j = 0; j < grid->size(); ++j)
    v[j] = (1.0 - x) * grid->nodes()[j] + x * zq[j];
  return QuantileGrid(grid, std::move(v));
}

double rmspr(const std::vector<QuantileGrid>& preds,
             const std::vector<QuantileGrid>& truths) {
  if (preds.empty() || preds.size() != truths.size())
    throw std::invalid_argument("rmspr: need equal nonempty lists");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = wasserstein_distance(preds[i], truths[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(preds.size()));
}

namespace {

RepRecord run_replication(const SimConfig& cfg, std::size_t rep,
                          const GridPtr& grid) {
  RepRecord rec;
  rec.rep = rep;
  rec.rmspr.fill(kNaN);
  rec.lambda_watl = kNaN;
  rec.lambda_awatl = kNaN;

  const std::uint64_t master = cfg.seed;
  Study target = generate_study(0, 0.0, cfg.n0,
                                substream_seed(master, {rep, 1}), grid);
  std::vector<Study> sources;
  sources.reserve(cfg.num_sources);
  for (std::size_t k = 1; k <= cfg.num_sources; ++k)
    sources.push_back(generate_study(k, cfg.psi[k - 1], cfg.source_size(k),
                                     substream_seed(master, {rep, 1 + k}),
                                     grid));

  // Query points are shared across estimators within a replication.
  Rng qrng(substream_seed(master, {rep, kQueryStream}));
  std::vector<std::vector<double>> queries(cfg.n_eval);
  std::vector<QuantileGrid> truths;
  truths.reserve(cfg.n_eval);
  for (std::size_t i = 0; i < cfg.n_eval; ++i) {
    queries[i] = {qrng.uniform_open()};
    truths.push_back(true_regression_quantile(queries[i][0], 0.0, grid));
  }

  TransferConfig tc;
  tc.mode = RegressionMode::global;
  tc.grid_size = cfg.grid_size;
  tc.ridge = cfg.ridge;
  tc.cv_folds = cfg.cv_folds;
  tc.lambda_grid = cfg.lambda_grid;
  tc.seed = substream_seed(master, {rep, kCvStream});

  auto baseline_rmspr = [&](const Study& study) {
    std::vector<QuantileGrid> preds;
    preds.reserve(queries.size());
    for (const auto& x : queries) preds.push_back(baseline_predict(study, x, tc));
    return rmspr(preds, truths);
  };

  for (Estimator est : cfg.estimators) {
    const std::size_t slot = static_cast<std::size_t>(est);
    switch (est) {
      case Estimator::only_target:
        rec.rmspr[slot] = baseline_rmspr(target);
        break;
      case Estimator::only_source: {
        std::vector<const Study*> ptrs;
        for (const Study& s : sources) ptrs.push_back(&s);
        rec.rmspr[slot] = baseline_rmspr(pool_studies(ptrs, "pooled_sources"));
        break;
      }
      case Estimator::pooled: {
        std::vector<const Study*> ptrs{&target};
        for (const Study& s : sources) ptrs.push_back(&s);
        rec.rmspr[slot] = baseline_rmspr(pool_studies(ptrs, "pooled_all"));
        break;
      }
      case Estimator::watl: {
        TransferConfig run = tc;
        if (cfg.lambda.has_value()) {
          run.lambda = *cfg.lambda;
        } else {
          run.lambda = cross_validate(target, sources, {}, run).lambda;
        }
        rec.lambda_watl = run.lambda;
        auto reports = watl_predict_batch(target, sources, queries, run);
        std::vector<QuantileGrid> preds;
        preds.reserve(reports.size());
        for (auto& r : reports) preds.push_back(std::move(r.prediction));
        rec.rmspr[slot] = rmspr(preds, truths);
        break;
      }
      case Estimator::awatl: {
        TransferConfig run = tc;
        run.informative_count = cfg.informative_count;
        if (cfg.lambda.has_value()) {
          run.lambda = *cfg.lambda;
        } else {
          const std::size_t l_grid[] = {cfg.informative_count};
          run.lambda = cross_validate(target, sources, {}, run, l_grid).lambda;
        }
        rec.lambda_awatl = run.lambda;
        auto reports = awatl_predict_batch(target, sources, queries, run);

        rec.pointwise_selection_rate.assign(cfg.num_sources, 0.0);
        std::vector<double> mean_scores(cfg.num_sources, 0.0);
        std::vector<std::size_t> truly_informative =
            select_informative(cfg.psi, cfg.informative_count);
        std::size_t exact = 0;
        std::vector<QuantileGrid> preds;
        preds.reserve(reports.size());
        for (auto& r : reports) {
          for (std::size_t k : r.selected)
            rec.pointwise_selection_rate[k] += 1.0;
          if (r.selected == truly_informative) ++exact;
          for (std::size_t k = 0; k < cfg.num_sources; ++k)
            mean_scores[k] += r.discrepancies[k];
          preds.push_back(std::move(r.prediction));
        }
        for (double& v : rec.pointwise_selection_rate)
          v /= static_cast<double>(reports.size());
        rec.pointwise_exact_rate =
            static_cast<double>(exact) / static_cast<double>(reports.size());
        for (double& v : mean_scores)
          v /= static_cast<double>(reports.size());
        rec.rep_selected =
            select_informative(mean_scores, cfg.informative_count);
        rec.rep_exact = rec.rep_selected == truly_informative;
        rec.rmspr[slot] = rmspr(preds, truths);
        break;
      }
    }
  }
  return rec;
}

}  // namespace

ExperimentReport run_experiment(const SimConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.config = config;
  report.records.resize(config.reps);

  const GridPtr grid = make_grid(config.grid_size);
  const std::size_t threads =
      config.threads > 0 ? config.threads : default_thread_count();

  parallel_for(0, config.reps, threads, [&](std::size_t rep) {
    try {
      report.records[rep] = run_replication(config, rep, grid);
    } catch (const std::exception& e) {
      RepRecord rec;
      rec.rep = rep;
      rec.rmspr.fill(kNaN);
      rec.failed = true;
      rec.error = e.what();
      report.records[rep] = rec;
    }
  });

  // Aggregate over completed replications.
  const bool ran_awatl =
      std::find(config.estimators.begin(), config.estimators.end(),
                Estimator::awatl) != config.estimators.end();
  for (Estimator est : config.estimators) {
    const std::size_t slot = static_cast<std::size_t>(est);
    double sum = 0.0, sum_sq = 0.0, lambda_sum = 0.0;
    std::size_t count = 0;
    for (const RepRecord& rec : report.records) {
      if (rec.failed) continue;
      sum += rec.rmspr[slot];
      sum_sq += rec.rmspr[slot] * rec.rmspr[slot];
      if (est == Estimator::watl) lambda_sum += rec.lambda_watl;
      if (est == Estimator::awatl) lambda_sum += rec.lambda_awatl;
      ++count;
    }
    EstimatorSummary summary;
    summary.estimator = est;
    if (count > 0) {
      summary.mean_rmspr = sum / static_cast<double>(count);
      double var = count > 1 ? (sum_sq - sum * sum / static_cast<double>(count)) /
                                   static_cast<double>(count - 1)
                             : 0.0;
      summary.sd_rmspr = std::sqrt(std::max(var, 0.0));
      summary.mean_lambda =
          (est == Estimator::watl || est == Estimator::awatl)
              ? lambda_sum / static_cast<double>(count)
              : kNaN;
    } else {
      summary.mean_rmspr = kNaN;
      summary.sd_rmspr = kNaN;
      summary.mean_lambda = kNaN;
    }
    report.summaries.push_back(summary);
  }

  report.selection_rates.assign(config.num_sources, 0.0);
  report.pointwise_selection_rates.assign(config.num_sources, 0.0);
  std::size_t completed = 0;
  double exact_sum = 0.0, pointwise_exact_sum = 0.0;
  for (const RepRecord& rec : report.records) {
    if (rec.failed) continue;
    ++completed;
    if (ran_awatl && !rec.pointwise_selection_rate.empty()) {
      for (std::size_t k : rec.rep_selected) report.selection_rates[k] += 1.0;
      if (rec.rep_exact) exact_sum += 1.0;
      for (std::size_t k = 0; k < config.num_sources; ++k)
        report.pointwise_selection_rates[k] += rec.pointwise_selection_rate[k];
      pointwise_exact_sum += rec.pointwise_exact_rate;
    }
  }
  report.completed_reps = completed;
  if (ran_awatl && completed > 0) {
    for (double& v : report.selection_rates)
      v /= static_cast<double>(completed);
    report.exact_selection_rate = exact_sum / static_cast<double>(completed);
    for (double& v : report.pointwise_selection_rates)
      v /= static_cast<double>(completed);
    report.pointwise_exact_rate =
        pointwise_exact_sum / static_cast<double>(completed);
  }

  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

}  // namespace watl
