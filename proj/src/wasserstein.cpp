#include "watl/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace watl {

double l2_distance(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f.grid(), g.grid(), "l2_distance");
  const auto& w = f.grid().weights();
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    double d = f.values()[j] - g.values()[j];
    acc += w[j] * d * d;
  }
  return std::sqrt(acc);
}

double l2_norm(const GridFunction& f) {
  const auto& w = f.grid().weights();
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j)
    acc += w[j] * f.values()[j] * f.values()[j];
  return std::sqrt(acc);
}

double wasserstein_distance(const QuantileGrid& a, const QuantileGrid& b) {
  require_same_grid(a.grid(), b.grid(), "wasserstein_distance");
  const auto& w = a.grid().weights();
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a.values()[j] - b.values()[j];
    acc += w[j] * d * d;
  }
  return std::sqrt(acc);
}

GridFunction frechet_mean(const std::vector<QuantileGrid>& qs,
                          std::span<const double> w) {
  if (qs.empty()) throw std::invalid_argument("frechet_mean: empty list");
  if (w.size() != qs.size())
    throw std::invalid_argument("frechet_mean: weights length mismatch");
  double wsum = 0.0;
  for (double wi : w) wsum += wi;
  if (wsum == 0.0)
    throw std::invalid_argument("frechet_mean: weights sum to zero");

  const GridPtr& grid = qs.front().grid_ptr();
  std::vector<double> values(grid->size(), 0.0);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    require_same_grid(*grid, qs[i].grid(), "frechet_mean");
    const auto& v = qs[i].values();
    for (std::size_t j = 0; j < values.size(); ++j) values[j] += w[i] * v[j];
  }
  for (double& x : values) x /= wsum;
  return GridFunction(grid, std::move(values));
}

std::vector<double> isotonic_fit(std::span<const double> values,
                                 std::span<const double> weights) {
  if (values.size() != weights.size())
    throw std::invalid_argument("isotonic_fit: size mismatch");
  const std::size_t n = values.size();

  // Block stack: each block stores its total weight, weighted mean, and
  // element count. Adjacent blocks whose means violate the order are pooled.
  std::vector<double> wsum(n), mean(n);
  std::vector<std::size_t> len(n);
  std::size_t top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    wsum[top] = weights[i];
    mean[top] = values[i];
    len[top] = 1;
    ++top;
    while (top > 1 && mean[top - 1] < mean[top - 2]) {
      double w = wsum[top - 2] + wsum[top - 1];
      mean[top - 2] =
          (wsum[top - 2] * mean[top - 2] + wsum[top - 1] * mean[top - 1]) / w;
      wsum[top - 2] = w;
      len[top - 2] += len[top - 1];
      --top;
    }
  }

  std::vector<double> out(n);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < top; ++b)
    for (std::size_t r = 0; r < len[b]; ++r) out[pos++] = mean[b];
  return out;
}

QuantileGrid project_to_quantile(const GridFunction& g, double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi) || !(lo <= hi))
    throw std::invalid_argument("project_to_quantile: invalid bounds");
  std::vector<double> v = isotonic_fit(g.values(), g.grid().weights());
  for (double& x : v) x = std::clamp(x, lo, hi);
  return QuantileGrid(g.grid_ptr(), std::move(v), lo, hi);
}

QuantileGrid quantile_from_samples(std::vector<double> ys, GridPtr grid) {
  if (ys.empty())
    throw std::invalid_argument("quantile_from_samples: empty sample");
  for (double y : ys) {
    if (!std::isfinite(y))
      throw std::invalid_argument("quantile_from_samples: non-finite sample");
  }
  if (!grid) throw std::invalid_argument("quantile_from_samples: null grid");

  std::sort(ys.begin(), ys.end());
  const double n = static_cast<double>(ys.size());
  std::vector<double> values(grid->size());
  for (std::size_t j = 0; j < grid->size(); ++j) {
    const double un = grid->nodes()[j] * n;
    double k = std::ceil(un);
    // If u*N is an integer that rounding pushed just above itself, ceil
    // lands one order statistic too high; keep the left-continuous choice.
    if (k - un > 1.0 - 1e-9) k -= 1.0;
    std::size_t idx = static_cast<std::size_t>(std::max(k, 1.0)) - 1;
    if (idx >= ys.size()) idx = ys.size() - 1;
    values[j] = ys[idx];
  }
  return QuantileGrid(std::move(grid), std::move(values));
}

}  // namespace watl
