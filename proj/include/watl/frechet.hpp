#pragma once

#include <optional>
#include <span>
#include <vector>

#include "watl/config.hpp"
#include "watl/covariates.hpp"
#include "watl/kernel.hpp"
#include "watl/study.hpp"
#include "watl/wasserstein.hpp"

namespace watl {

// Empirical mean and covariance of a covariate matrix, with the ridged
// inverse used by the global weight function. Computed once per study and
// shared read-only afterwards.
class MomentCache {
 public:
  // ridge == nullopt applies the default 1e-8 * trace(cov)/p. Passing an
  // explicit 0 requests the exact inverse and raises singular_matrix_error
  // when the Cholesky factorization fails.
  explicit MomentCache(const CovariateMatrix& x,
                       std::optional<double> ridge = std::nullopt);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& cov() const { return cov_; }          // p*p row major
  const std::vector<double>& cov_inv() const { return cov_inv_; }  // (cov+eps*I)^-1
  double ridge() const { return ridge_; }

 private:
  std::vector<double> mean_;
  std::vector<double> cov_;
  std::vector<double> cov_inv_;
  double ridge_;
};

// Global regression weights s_i = 1 + (X_i - mean)' * cov_inv * (x - mean).
// Weights may be negative; they always sum to n because the centered rows
// sum to zero. With a single row the quadratic form vanishes identically
// and the weight is, exactly, 1.
std::vector<double> global_weights(const CovariateMatrix& x_mat,
                                   std::span<const double> x,
                                   const MomentCache& moments);

std::vector<double> global_weights(const CovariateMatrix& x_mat,
                                   std::span<const double> x,
                                   std::optional<double> ridge = std::nullopt);

// Local linear regression weights for a scalar predictor:
//   s_i = K_h(X_i - x) * (u2 - u1 * (X_i - x)) / sigma0^2
// with u_j the empirical kernel moments and sigma0^2 = u0*u2 - u1^2.
// The weights average to one by construction. Raises degenerate_window_error
// when sigma0^2 collapses (all window mass at one point, or bandwidth too
// small to reach any data).
std::vector<double> local_weights(const CovariateMatrix& x_mat, double x,
                                  const KernelSpec& kernel);

// (1/n) * sum_i weights[i] * qs[i], evaluated pointwise on the grid. May be
// non-monotone because the regression weights can be negative.
GridFunction weighted_quantile_estimate(std::span<const double> weights,
                                        const std::vector<QuantileGrid>& qs);

// Plain global or local regression on one study: weighted quantile estimate
// followed by projection onto valid quantile functions. Serves the
// target-only, source-only, and pooled baselines.
QuantileGrid baseline_predict(const Study& study, std::span<const double> x,
                              const TransferConfig& config);

}  // namespace watl
