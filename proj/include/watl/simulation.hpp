#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "watl/config.hpp"
#include "watl/normal.hpp"
#include "watl/study.hpp"

namespace watl {

enum class Estimator : std::size_t {
  watl = 0,
  awatl = 1,
  only_target = 2,
  only_source = 3,
  pooled = 4,
};
inline constexpr std::size_t kEstimatorCount = 5;

const char* estimator_name(Estimator e);
std::optional<Estimator> estimator_from_name(const std::string& name);

// One simulation cell: K sources with similarity parameters psi_k, source
// sizes k*tau (or explicit overrides), global-mode fits, RMSPR against the
// closed-form truth at n_eval uniform query points.
struct SimConfig {
  std::size_t num_sources = 5;  // K
  std::size_t n0 = 200;
  std::size_t tau = 100;                   // n_k = k * tau
  std::vector<std::size_t> source_sizes;   // optional override, size K
  std::vector<double> psi;                 // size K, entries in [0,1)
  std::size_t reps = 50;
  std::size_t n_eval = 100;
  std::uint64_t seed = 1;
  std::size_t grid_size = 100;
  std::vector<Estimator> estimators{Estimator::watl, Estimator::only_target};

  std::optional<double> lambda;  // nullopt -> five-fold CV on the default grid
  std::size_t informative_count = 2;  // L for the adaptive estimator
  std::size_t cv_folds = 5;
  std::vector<double> lambda_grid;  // empty -> default grid
  std::optional<double> ridge;
  std::size_t threads = 0;  // 0 -> default_thread_count()

  std::size_t source_size(std::size_t k) const;  // k is 1-based
  void validate() const;
};

struct RepRecord {
  std::size_t rep = 0;
  std::array<double, kEstimatorCount> rmspr{};  // NaN when not run
  double lambda_watl = 0.0;   // NaN when not run / fixed
  double lambda_awatl = 0.0;
  // Adaptive selection, recorded two ways: per query point (fraction of the
  // rep's query points at which each source was selected) and once per
  // replication from the batch-averaged discrepancy scores.
  std::vector<double> pointwise_selection_rate;  // per source
  double pointwise_exact_rate = 0.0;  // selected set == true informative set
  std::vector<std::size_t> rep_selected;  // 0-based, from batch-mean scores
  bool rep_exact = false;
  bool failed = false;
  std::string error;
};

struct EstimatorSummary {
  Estimator estimator;
  double mean_rmspr = 0.0;
  double sd_rmspr = 0.0;
  double mean_lambda = 0.0;  // NaN for estimators without a penalty
};

struct ExperimentReport {
  SimConfig config;
  std::vector<EstimatorSummary> summaries;
  // Fraction of replications in which each source entered the informative
  // set chosen from the rep's batch-averaged scores; `exact` counts reps
  // whose chosen set equals the truly informative one.
  std::vector<double> selection_rates;
  double exact_selection_rate = 0.0;
  // Same quantities averaged over individual query points.
  std::vector<double> pointwise_selection_rates;
  double pointwise_exact_rate = 0.0;
  std::size_t completed_reps = 0;
  std::vector<RepRecord> records;
  double runtime_seconds = 0.0;  // console diagnostic; not serialized
};

// Quantile values of one simulated response on the grid:
//   w*(1-u)*u + (1-x)*u + x * Q_Z(u)
// where Q_Z is the N(0.5, 1-psi) quantile truncated to (0,1). The sum is
// nondecreasing in u for x in [0,1] and |w| < 0.5.
std::vector<double> sim_response_values(double x, double w, double psi,
                                        const ProbGrid& grid);

// Study k of the synthetic design: X ~ U(0,1), w ~ N(0,1) truncated to
// (-0.5, 0.5), responses materialized on `grid`. Row i draws its latents
// from substream {i, 0} of `seed`, so a longer study extends a shorter one
// generated from the same seed. k == 0 is the target (psi must be 0 there
// by convention of the design; the caller passes it explicitly).
Study generate_study(std::size_t k, double psi, std::size_t n,
                     std::uint64_t seed, const GridPtr& grid);

// Empirical-measure twin of generate_study: identical latents for the same
// seed, but each response is observed only through `num_samples` iid draws
// (inverse-CDF sampling from substream {i, 1}).
Study generate_study_em(std::size_t k, double psi, std::size_t n,
                        std::size_t num_samples, std::uint64_t seed);

// Closed-form regression function of the design: (1-x)*u + x*Q_Z(u). The
// w*(1-u)*u noise term has conditional mean zero given x and drops out.
QuantileGrid true_regression_quantile(double x, double psi,
                                      const GridPtr& grid);

// Root mean squared prediction risk:
//   sqrt( (1/N) * sum_i d_W^2(pred_i, truth_i) ).
double rmspr(const std::vector<QuantileGrid>& preds,
             const std::vector<QuantileGrid>& truths);

// Runs one simulation cell: per replication, generates studies, fits each
// requested estimator at shared uniform query points, and aggregates RMSPR
// (plus selection rates for the adaptive estimator). Replications use
// substreams of config.seed and may run in parallel without changing any
// result. A failed replication is recorded and excluded from aggregation.
ExperimentReport run_experiment(const SimConfig& config);

}  // namespace watl
