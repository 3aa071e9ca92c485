#pragma once

#include <limits>
#include <span>
#include <vector>

#include "watl/grid.hpp"

namespace watl {

// Weighted L2 metric on the grid: sqrt( sum_j w_j (f_j - g_j)^2 ).
double l2_distance(const GridFunction& f, const GridFunction& g);

// Weighted L2 norm: sqrt( sum_j w_j f_j^2 ).
double l2_norm(const GridFunction& f);

// 2-Wasserstein distance between univariate distributions, computed as the
// L2 distance between their quantile functions.
double wasserstein_distance(const QuantileGrid& a, const QuantileGrid& b);

// Pointwise weighted average of quantile functions. The result is a plain
// GridFunction; with nonnegative weights it is already monotone, otherwise
// the caller projects. Requires a nonempty list, a shared grid, and a
// nonzero weight sum.
GridFunction frechet_mean(const std::vector<QuantileGrid>& qs,
                          std::span<const double> w);

// Weighted least-squares projection onto nondecreasing vectors
// (pool-adjacent-violators), one block stack pass. Weights must be positive.
std::vector<double> isotonic_fit(std::span<const double> values,
                                 std::span<const double> weights);

// Projection onto the set of valid quantile functions: weighted PAVA with
// the grid's quadrature weights, then clipping to [lo, hi]. Clipping a
// monotone vector preserves monotonicity, and this order of operations is
// the exact weighted-L2 projection onto the box-intersected monotone cone.
QuantileGrid project_to_quantile(
    const GridFunction& g,
    double lo = -std::numeric_limits<double>::infinity(),
    double hi = std::numeric_limits<double>::infinity());

// Empirical quantile function: the left-continuous inverse of the empirical
// CDF, evaluated at the grid nodes. The value at node u is the ceil(u*N)-th
// order statistic of the sample.
QuantileGrid quantile_from_samples(std::vector<double> ys, GridPtr grid);

}  // namespace watl
