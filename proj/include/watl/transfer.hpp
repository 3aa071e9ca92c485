#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "watl/config.hpp"
#include "watl/frechet.hpp"
#include "watl/study.hpp"

namespace watl {

struct FitDiagnostics {
  // (1/n) * sum of regression weights minus 1, per study; zero up to
  // floating point for both weight families.
  double target_weight_residual = 0.0;
  std::vector<double> source_weight_residuals;
  // Sources whose sample size is below sqrt(total sample size); kept in the
  // fit but flagged so the caller can decide to exclude them.
  std::vector<std::size_t> small_sources;
};

struct CvPoint {
  double lambda = 0.0;
  std::optional<std::size_t> informative_count;
  std::optional<double> bandwidth;
  double score = 0.0;
};

struct CvResult {
  double lambda = 0.0;
  std::optional<std::size_t> informative_count;
  std::optional<double> bandwidth;
  std::vector<CvPoint> trace;
};

// Per-query-point fit output.
struct FitReport {
  QuantileGrid prediction;
  GridFunction f_hat;   // sample-size-weighted auxiliary estimate
  GridFunction f0_hat;  // bias-corrected target estimate
  std::vector<double> discrepancies;   // per-source, empty when no sources
  std::vector<std::size_t> selected;   // 0-based source indices, ascending
  double lambda_used = 0.0;
  std::vector<CvPoint> cv_trace;       // filled by callers that ran CV
  FitDiagnostics diagnostics;
};

// Sample-size-weighted average of per-study weighted quantile estimates:
//   (sum_k n_k)^-1 * sum_k n_k * fhat_k(x).
GridFunction aux_estimate(
    const std::vector<std::reference_wrapper<const Study>>& studies,
    std::span<const double> x, const TransferConfig& config);

// Penalized least-squares correction of the target estimate toward the
// auxiliary aggregate. Because the regression weights average to one, the
// objective reduces (up to a constant) to
//   ||g - target_estimate||^2 + lambda * ||g - aggregate||,
// whose minimizer is the norm-prox: with d = target_estimate - aggregate
// and r = ||d||, return aggregate when r <= lambda/2, otherwise
// aggregate + (1 - lambda/(2r)) * d.
GridFunction bias_correct(const GridFunction& target_estimate,
                          const GridFunction& aggregate, double lambda);

// Per-source discrepancy ||fhat_0(x) - fhat_k(x)||, computed on the
// unprojected weighted estimates.
std::vector<double> discrepancy_scores(const Study& target,
                                       const std::vector<Study>& sources,
                                       std::span<const double> x,
                                       const TransferConfig& config);

// Indices of the L smallest scores; exact ties broken by the smaller index.
std::vector<std::size_t> select_informative(std::span<const double> scores,
                                            std::size_t count);

// Transfer fit with every source treated as informative: auxiliary
// aggregate, bias correction with config.lambda, projection.
FitReport watl_predict(const Study& target, const std::vector<Study>& sources,
                       std::span<const double> x, const TransferConfig& config);

// Adaptive variant: restricts the aggregate to the config.informative_count
// sources with the smallest discrepancy scores at x.
FitReport awatl_predict(const Study& target, const std::vector<Study>& sources,
                        std::span<const double> x,
                        const TransferConfig& config);

// Batch versions reuse per-study moment caches across query points. The
// adaptive batch honors config.shared_informative_set by averaging scores
// over the batch before selecting.
std::vector<FitReport> watl_predict_batch(
    const Study& target, const std::vector<Study>& sources,
    const std::vector<std::vector<double>>& queries,
    const TransferConfig& config);

std::vector<FitReport> awatl_predict_batch(
    const Study& target, const std::vector<Study>& sources,
    const std::vector<std::vector<double>>& queries,
    const TransferConfig& config);

// Five-fold-style cross-validation over lambda (and, when l_grid is
// nonempty, the informative-set size; and, in local mode when
// bandwidth_grid is nonempty, the bandwidth). Target rows are partitioned
// into config.cv_folds folds, deterministically from config.seed; each
// held-out row is predicted from the remaining rows plus the sources, and
// candidates are scored by the mean squared Wasserstein distance to the
// held-out responses. Ties break toward the smaller lambda, then the
// smaller informative count, then the smaller bandwidth. Bandwidths whose
// local window degenerates on some fold are kept in the trace with an
// infinite score. `query_batch` is consulted only by the
// shared-informative-set extension.
CvResult cross_validate(const Study& target, const std::vector<Study>& sources,
                        const std::vector<std::vector<double>>& query_batch,
                        const TransferConfig& config,
                        std::span<const std::size_t> l_grid = {},
                        std::span<const double> bandwidth_grid = {});

// Log-spaced bandwidth candidates around the Silverman-style pilot
// 1.06 * sd(X) * n^(-1/5); scalar-predictor studies only.
std::vector<double> default_bandwidth_grid(const Study& target,
                                           std::size_t count = 8);

}  // namespace watl
