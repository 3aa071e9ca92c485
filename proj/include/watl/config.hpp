#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "watl/kernel.hpp"

namespace watl {

enum class RegressionMode { global, local };

// Knobs for the transfer pipeline. Defaults follow the standard protocol:
// lambda cross-validated on [0, 3] in steps of 0.1 with five folds,
// midpoint grid of size 500, trace-scaled ridge on the covariance.
struct TransferConfig {
  RegressionMode mode = RegressionMode::global;

  double lambda = 0.0;              // regularization strength
  std::size_t informative_count = 0;  // L, adaptive selection only

  KernelSpec kernel;                // local mode bandwidth and family

  std::size_t grid_size = 500;      // M, used when materializing samples
  std::optional<double> ridge;      // nullopt -> 1e-8 * trace(cov)/p

  double support_lo = -std::numeric_limits<double>::infinity();
  double support_hi = std::numeric_limits<double>::infinity();

  std::size_t cv_folds = 5;
  std::vector<double> lambda_grid;  // empty -> default_lambda_grid()
  std::uint64_t seed = 0;

  // Extension, off by default: pick one informative set per query batch by
  // averaging discrepancy scores instead of selecting per query point.
  bool shared_informative_set = false;
};

// The grid 0, 0.1, ..., 3.0.
std::vector<double> default_lambda_grid();

// Theory-scaled regularization n0^(-1/2 + eps); non-default alternative to
// cross-validation.
double theory_lambda(std::size_t n0, double eps = 0.05);

}  // namespace watl
