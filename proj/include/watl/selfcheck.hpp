#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "watl/grid.hpp"

namespace watl::selfcheck {

// Brute-force weighted least-squares projection onto nondecreasing vectors
// clipped to [lo, hi]: enumerates every partition of the indices into
// consecutive blocks, assigns each block its clamped weighted mean, keeps
// the feasible candidate with the smallest objective. Exponential in the
// length; intended for cross-checking the production projection at small M.
std::vector<double> monotone_projection_oracle(std::span<const double> values,
                                               std::span<const double> weights,
                                               double lo, double hi);

// Golden-section minimization over t in [0,1] of
//   || aggregate + t*d - target ||^2 + lambda * t * ||d||,   d = target - aggregate,
// in the grid-weighted norm. Numerical stand-in for the closed-form
// bias-correction step.
std::vector<double> prox_oracle(const GridFunction& target_estimate,
                                const GridFunction& aggregate, double lambda);

// The reduced bias-correction objective ||g - target||^2 + lambda*||g - aggregate||.
double prox_objective(std::span<const double> g,
                      const GridFunction& target_estimate,
                      const GridFunction& aggregate, double lambda);

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct FastCheckOptions {
  std::uint64_t seed = 20240801;
  // Test hook: deliberately corrupts a grid inside the invariant check so
  // the failure path of the runner can be exercised.
  bool inject_grid_fault = false;
};

// The fast acceptance subset: structural invariants, metric identities,
// weight identities, the prox and projection oracles, pipeline
// degeneracies, and a small deterministic simulation smoke run.
std::vector<CheckResult> run_fast_checks(const FastCheckOptions& options);

}  // namespace watl::selfcheck
