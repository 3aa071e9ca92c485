#include "watl/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "watl/errors.hpp"
#include "watl/rng.hpp"

namespace watl {

namespace {

constexpr std::uint64_t kCvFoldStream = 0xf01d;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Weighted-estimate evaluator for one study; global mode caches the moments.
class StudyEstimator {
 public:
  StudyEstimator(const Study& study, const TransferConfig& config)
      : study_(&study), mode_(config.mode), kernel_(config.kernel) {
    if (mode_ == RegressionMode::global && study.n() > 1)
      moments_.emplace(study.covariates(), config.ridge);
  }

  const Study& study() const { return *study_; }

  std::vector<double> weights(std::span<const double> x) const {
    if (mode_ == RegressionMode::global) {
      if (study_->n() == 1) return {1.0};
      return global_weights(study_->covariates(), x, *moments_);
    }
    if (study_->p() != 1)
      throw std::invalid_argument(
          "local mode requires a scalar predictor (p == 1)");
    return local_weights(study_->covariates(), x[0], kernel_);
  }

  GridFunction estimate(std::span<const double> x) const {
    return weighted_quantile_estimate(weights(x), study_->responses());
  }

  GridFunction estimate(std::span<const double> x, double* residual) const {
    std::vector<double> w = weights(x);
    if (residual) {
      double s = std::accumulate(w.begin(), w.end(), 0.0);
      *residual = s / static_cast<double>(w.size()) - 1.0;
    }
    return weighted_quantile_estimate(w, study_->responses());
  }

 private:
  const Study* study_;
  RegressionMode mode_;
  KernelSpec kernel_;
  std::optional<MomentCache> moments_;
};

// Materializes sample-mode studies onto a shared grid and keeps the
// converted copies alive next to pointers at the originals.
struct PipelineData {
  GridPtr grid;
  std::vector<Study> storage;
  const Study* target = nullptr;
  std::vector<const Study*> sources;
};

GridPtr resolve_grid(const Study& target, const std::vector<Study>& sources,
                     const TransferConfig& config) {
  if (!target.sample_mode()) return target.response_grid();
  for (const Study& s : sources)
    if (!s.sample_mode()) return s.response_grid();
  return make_grid(config.grid_size);
}

PipelineData prepare(const Study& target, const std::vector<Study>& sources,
                     const TransferConfig& config) {
  if (target.n() == 0) throw std::invalid_argument("transfer: empty target");
  PipelineData data;
  data.grid = resolve_grid(target, sources, config);
  data.storage.reserve(1 + sources.size());

  auto resolve = [&](const Study& s) -> const Study* {
    if (!s.sample_mode()) {
      require_same_grid(*data.grid, s.responses().front().grid(), "transfer");
      return &s;
    }
    data.storage.push_back(s.materialized(data.grid));
    return &data.storage.back();
  };

  data.target = resolve(target);
  data.sources.reserve(sources.size());
  for (const Study& s : sources) data.sources.push_back(resolve(s));
  return data;
}

GridFunction combine_estimates(const std::vector<const GridFunction*>& parts,
                               const std::vector<std::size_t>& sizes) {
  const GridPtr& grid = parts.front()->grid_ptr();
  std::vector<double> values(grid->size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double nk = static_cast<double>(sizes[k]);
    total += nk;
    const auto& v = parts[k]->values();
    for (std::size_t j = 0; j < values.size(); ++j) values[j] += nk * v[j];
  }
  for (double& x : values) x /= total;
  return GridFunction(grid, std::move(values));
}

std::vector<std::size_t> all_indices(std::size_t count) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::vector<std::size_t> flag_small_sources(const Study& target,
                                            const std::vector<const Study*>& sources) {
  std::size_t total = target.n();
  for (const Study* s : sources) total += s->n();
  const double floor = std::sqrt(static_cast<double>(total));
  std::vector<std::size_t> flagged;
  for (std::size_t k = 0; k < sources.size(); ++k)
    if (static_cast<double>(sources[k]->n()) < floor) flagged.push_back(k);
  return flagged;
}

// Full pipeline at one query point given prebuilt estimators.
FitReport fit_at(const PipelineData& data, const StudyEstimator& target_est,
                 const std::vector<StudyEstimator>& source_ests,
                 std::span<const double> x, const TransferConfig& config,
                 bool adaptive,
                 const std::vector<std::size_t>* forced_selection) {
  FitDiagnostics diag;
  GridFunction f0_raw = target_est.estimate(x, &diag.target_weight_residual);

  std::vector<GridFunction> fks;
  std::vector<double> scores;
  fks.reserve(source_ests.size());
  scores.reserve(source_ests.size());
  diag.source_weight_residuals.resize(source_ests.size());
  for (std::size_t k = 0; k < source_ests.size(); ++k) {
    fks.push_back(source_ests[k].estimate(x, &diag.source_weight_residuals[k]));
    scores.push_back(l2_distance(f0_raw, fks.back()));
  }
  diag.small_sources = flag_small_sources(*data.target, data.sources);

  std::vector<std::size_t> selected;
  if (forced_selection) {
    selected = *forced_selection;
  } else if (adaptive) {
    selected = select_informative(scores, config.informative_count);
  } else {
    selected = all_indices(source_ests.size());
  }

  std::vector<const GridFunction*> parts{&f0_raw};
  std::vector<std::size_t> sizes{data.target->n()};
  for (std::size_t k : selected) {
    parts.push_back(&fks[k]);
    sizes.push_back(data.sources[k]->n());
  }
  GridFunction f_hat = combine_estimates(parts, sizes);
  GridFunction f0_hat = bias_correct(f0_raw, f_hat, config.lambda);
  QuantileGrid prediction =
      project_to_quantile(f0_hat, config.support_lo, config.support_hi);

  return FitReport{std::move(prediction), std::move(f_hat), std::move(f0_hat),
                   std::move(scores),     std::move(selected),
                   config.lambda,         {},
                   std::move(diag)};
}

std::vector<FitReport> predict_batch_impl(
    const Study& target, const std::vector<Study>& sources,
    const std::vector<std::vector<double>>& queries,
    const TransferConfig& config, bool adaptive) {
  PipelineData data = prepare(target, sources, config);
  if (adaptive && config.informative_count > sources.size())
    throw std::invalid_argument("awatl_predict: L exceeds the source count");

  StudyEstimator target_est(*data.target, config);
  std::vector<StudyEstimator> source_ests;
  source_ests.reserve(data.sources.size());
  for (const Study* s : data.sources) source_ests.emplace_back(*s, config);

  // Shared-set extension: one informative set per batch, selected from the
  // batch-averaged discrepancy scores.
  std::optional<std::vector<std::size_t>> shared;
  if (adaptive && config.shared_informative_set && queries.size() > 1) {
    std::vector<double> mean_scores(source_ests.size(), 0.0);
    for (const auto& x : queries) {
      GridFunction f0 = target_est.estimate(x);
      for (std::size_t k = 0; k < source_ests.size(); ++k)
        mean_scores[k] += l2_distance(f0, source_ests[k].estimate(x));
    }
    for (double& s : mean_scores) s /= static_cast<double>(queries.size());
    shared = select_informative(mean_scores, config.informative_count);
  }

  std::vector<FitReport> reports;
  reports.reserve(queries.size());
  for (const auto& x : queries)
    reports.push_back(fit_at(data, target_est, source_ests, x, config,
                             adaptive, shared ? &*shared : nullptr));
  return reports;
}

}  // namespace

GridFunction aux_estimate(
    const std::vector<std::reference_wrapper<const Study>>& studies,
    std::span<const double> x, const TransferConfig& config) {
  if (studies.empty()) throw std::invalid_argument("aux_estimate: no studies");

  // Resolve a shared grid, then materialize and evaluate each study.
  GridPtr grid;
  for (const Study& s : studies)
    if (!s.sample_mode()) {
      grid = s.response_grid();
      break;
    }
  if (!grid) grid = make_grid(config.grid_size);

  std::vector<Study> storage;
  storage.reserve(studies.size());
  std::vector<GridFunction> estimates;
  std::vector<std::size_t> sizes;
  for (const Study& s : studies) {
    const Study* working = &s;
    if (s.sample_mode()) {
      storage.push_back(s.materialized(grid));
      working = &storage.back();
    } else {
      require_same_grid(*grid, s.responses().front().grid(), "aux_estimate");
    }
    StudyEstimator est(*working, config);
    estimates.push_back(est.estimate(x));
    sizes.push_back(working->n());
  }
  std::vector<const GridFunction*> parts;
  parts.reserve(estimates.size());
  for (const auto& e : estimates) parts.push_back(&e);
  return combine_estimates(parts, sizes);
}

GridFunction bias_correct(const GridFunction& target_estimate,
                          const GridFunction& aggregate, double lambda) {
  require_same_grid(target_estimate.grid(), aggregate.grid(), "bias_correct");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("bias_correct: lambda must be nonnegative");
  if (lambda == 0.0) return target_estimate;

  std::vector<double> d(target_estimate.size());
  for (std::size_t j = 0; j < d.size(); ++j)
    d[j] = target_estimate.values()[j] - aggregate.values()[j];
  const auto& w = target_estimate.grid().weights();
  double r2 = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) r2 += w[j] * d[j] * d[j];
  const double r = std::sqrt(r2);
  if (r <= lambda / 2.0) return aggregate;

  const double t = 1.0 - lambda / (2.0 * r);
  std::vector<double> values(d.size());
  for (std::size_t j = 0; j < d.size(); ++j)
    values[j] = aggregate.values()[j] + t * d[j];
  return GridFunction(target_estimate.grid_ptr(), std::move(values));
}

std::vector<double> discrepancy_scores(const Study& target,
                                       const std::vector<Study>& sources,
                                       std::span<const double> x,
                                       const TransferConfig& config) {
  PipelineData data = prepare(target, sources, config);
  StudyEstimator target_est(*data.target, config);
  GridFunction f0 = target_est.estimate(x);
  std::vector<double> scores;
  scores.reserve(data.sources.size());
  for (const Study* s : data.sources) {
    StudyEstimator est(*s, config);
    scores.push_back(l2_distance(f0, est.estimate(x)));
  }
  return scores;
}

std::vector<std::size_t> select_informative(std::span<const double> scores,
                                            std::size_t count) {
  if (count > scores.size())
    throw std::invalid_argument("select_informative: L exceeds score count");
  std::vector<std::size_t> order = all_indices(scores.size());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (scores[a] != scores[b]) return scores[a] < scores[b];
                     return a < b;
                   });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

FitReport watl_predict(const Study& target, const std::vector<Study>& sources,
                       std::span<const double> x,
                       const TransferConfig& config) {
  std::vector<std::vector<double>> queries{std::vector<double>(x.begin(), x.end())};
  return std::move(predict_batch_impl(target, sources, queries, config, false).front());
}

FitReport awatl_predict(const Study& target, const std::vector<Study>& sources,
                        std::span<const double> x,
                        const TransferConfig& config) {
  std::vector<std::vector<double>> queries{std::vector<double>(x.begin(), x.end())};
  return std::move(predict_batch_impl(target, sources, queries, config, true).front());
}

std::vector<FitReport> watl_predict_batch(
    const Study& target, const std::vector<Study>& sources,
    const std::vector<std::vector<double>>& queries,
    const TransferConfig& config) {
  return predict_batch_impl(target, sources, queries, config, false);
}

std::vector<FitReport> awatl_predict_batch(
    const Study& target, const std::vector<Study>& sources,
    const std::vector<std::vector<double>>& queries,
    const TransferConfig& config) {
  return predict_batch_impl(target, sources, queries, config, true);
}

CvResult cross_validate(const Study& target, const std::vector<Study>& sources,
                        const std::vector<std::vector<double>>& query_batch,
                        const TransferConfig& config,
                        std::span<const std::size_t> l_grid,
                        std::span<const double> bandwidth_grid) {
  PipelineData data = prepare(target, sources, config);
  const std::size_t n0 = data.target->n();
  const std::size_t folds = config.cv_folds;
  if (folds < 2)
    throw std::invalid_argument("cross_validate: need at least 2 folds");

  std::vector<double> lambdas =
      config.lambda_grid.empty() ? default_lambda_grid() : config.lambda_grid;

  // SIZE_MAX marks the non-adaptive candidate (all sources used).
  std::vector<std::size_t> l_values;
  if (l_grid.empty()) {
    l_values.push_back(std::numeric_limits<std::size_t>::max());
  } else {
    for (std::size_t l : l_grid) {
      if (l > sources.size())
        throw std::invalid_argument("cross_validate: L exceeds source count");
      l_values.push_back(l);
    }
  }

  std::vector<double> h_values;
  if (config.mode == RegressionMode::local) {
    if (bandwidth_grid.empty())
      h_values.push_back(config.kernel.h);
    else
      h_values.assign(bandwidth_grid.begin(), bandwidth_grid.end());
  } else {
    h_values.push_back(config.kernel.h);  // unused placeholder
  }

  // Deterministic fold assignment.
  std::vector<std::size_t> perm = all_indices(n0);
  Rng fold_rng(substream_seed(config.seed, {kCvFoldStream}));
  shuffle_indices(perm, fold_rng);
  std::vector<std::vector<std::size_t>> fold_rows(folds);
  {
    std::size_t base = n0 / folds, extra = n0 % folds, pos = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::size_t len = base + (f < extra ? 1 : 0);
      if (len < 2)
        throw std::invalid_argument(
            "cross_validate: fold with fewer than 2 rows");
      fold_rows[f].assign(perm.begin() + pos, perm.begin() + pos + len);
      pos += len;
    }
  }

  const std::size_t n_l = l_values.size(), n_lam = lambdas.size();
  auto cell = [&](std::size_t hi, std::size_t li, std::size_t lj) {
    return (hi * n_l + li) * n_lam + lj;
  };
  std::vector<double> total(h_values.size() * n_l * n_lam, 0.0);

  for (std::size_t hi = 0; hi < h_values.size(); ++hi) {
    TransferConfig run = config;
    run.kernel.h = h_values[hi];
    try {
      std::vector<StudyEstimator> source_ests;
      source_ests.reserve(data.sources.size());
      for (const Study* s : data.sources) source_ests.emplace_back(*s, run);

      for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_rows;
        train_rows.reserve(n0 - fold_rows[f].size());
        for (std::size_t g = 0; g < folds; ++g)
          if (g != f)
            train_rows.insert(train_rows.end(), fold_rows[g].begin(),
                              fold_rows[g].end());
        Study train = data.target->subset(train_rows);
        StudyEstimator train_est(train, run);

        // Shared-set extension: one selection per (fold, L) from scores
        // averaged over the query batch.
        std::vector<std::vector<std::size_t>> shared_sets;
        if (run.shared_informative_set && !query_batch.empty() &&
            !source_ests.empty()) {
          std::vector<double> mean_scores(source_ests.size(), 0.0);
          for (const auto& xq : query_batch) {
            GridFunction f0 = train_est.estimate(xq);
            for (std::size_t k = 0; k < source_ests.size(); ++k)
              mean_scores[k] += l2_distance(f0, source_ests[k].estimate(xq));
          }
          for (double& s : mean_scores)
            s /= static_cast<double>(query_batch.size());
          for (std::size_t l : l_values)
            shared_sets.push_back(
                l == std::numeric_limits<std::size_t>::max()
                    ? all_indices(source_ests.size())
                    : select_informative(mean_scores, l));
        }

        for (std::size_t i : fold_rows[f]) {
          auto x = data.target->covariates().row(i);
          GridFunction f0 = train_est.estimate(x);
          std::vector<GridFunction> fks;
          std::vector<double> scores;
          fks.reserve(source_ests.size());
          for (const auto& est : source_ests) {
            fks.push_back(est.estimate(x));
            scores.push_back(l2_distance(f0, fks.back()));
          }

          for (std::size_t li = 0; li < n_l; ++li) {
            std::vector<std::size_t> sel;
            if (!shared_sets.empty()) {
              sel = shared_sets[li];
            } else if (l_values[li] ==
                       std::numeric_limits<std::size_t>::max()) {
              sel = all_indices(source_ests.size());
            } else {
              sel = select_informative(scores, l_values[li]);
            }
            std::vector<const GridFunction*> parts{&f0};
            std::vector<std::size_t> sizes{train.n()};
            for (std::size_t k : sel) {
              parts.push_back(&fks[k]);
              sizes.push_back(data.sources[k]->n());
            }
            GridFunction aggregate = combine_estimates(parts, sizes);

            for (std::size_t lj = 0; lj < n_lam; ++lj) {
              GridFunction corrected = bias_correct(f0, aggregate, lambdas[lj]);
              QuantileGrid pred = project_to_quantile(
                  corrected, run.support_lo, run.support_hi);
              double err =
                  wasserstein_distance(pred, data.target->responses()[i]);
              total[cell(hi, li, lj)] += err * err;
            }
          }
        }
      }
    } catch (const degenerate_window_error&) {
      for (std::size_t li = 0; li < n_l; ++li)
        for (std::size_t lj = 0; lj < n_lam; ++lj)
          total[cell(hi, li, lj)] = kInf;
    }
  }

  CvResult result;
  double best = kInf;
  bool first = true;
  for (std::size_t lj = 0; lj < n_lam; ++lj)
    for (std::size_t li = 0; li < n_l; ++li)
      for (std::size_t hi = 0; hi < h_values.size(); ++hi) {
        double score = total[cell(hi, li, lj)] / static_cast<double>(n0);
        if (first || score < best) {
          first = false;
          best = score;
          result.lambda = lambdas[lj];
          result.informative_count =
              l_values[li] == std::numeric_limits<std::size_t>::max()
                  ? std::nullopt
                  : std::optional<std::size_t>(l_values[li]);
          result.bandwidth = config.mode == RegressionMode::local
                                 ? std::optional<double>(h_values[hi])
                                 : std::nullopt;
        }
      }

  for (std::size_t hi = 0; hi < h_values.size(); ++hi)
    for (std::size_t li = 0; li < n_l; ++li)
      for (std::size_t lj = 0; lj < n_lam; ++lj)
        result.trace.push_back(
            CvPoint{lambdas[lj],
                    l_values[li] == std::numeric_limits<std::size_t>::max()
                        ? std::nullopt
                        : std::optional<std::size_t>(l_values[li]),
                    config.mode == RegressionMode::local
                        ? std::optional<double>(h_values[hi])
                        : std::nullopt,
                    total[cell(hi, li, lj)] / static_cast<double>(n0)});
  return result;
}

std::vector<double> default_bandwidth_grid(const Study& target,
                                           std::size_t count) {
  if (target.p() != 1)
    throw std::invalid_argument(
        "default_bandwidth_grid: requires a scalar predictor");
  if (count < 2)
    throw std::invalid_argument("default_bandwidth_grid: need >= 2 candidates");
  const std::size_t n = target.n();
  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += target.covariates()(i, 0);
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = target.covariates()(i, 0) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  double sd = std::sqrt(var);
  if (!(sd > 0.0)) sd = 1.0;
  const double pilot =
      1.06 * sd * std::pow(static_cast<double>(n), -0.2);

  // Factor-of-four spread in log space around the pilot.
  std::vector<double> grid(count);
  const double lo = std::log(pilot / 4.0), hi = std::log(pilot * 4.0);
  for (std::size_t i = 0; i < count; ++i)
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(count - 1));
  return grid;
}

}  // namespace watl
