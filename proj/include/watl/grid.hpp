#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

namespace watl {

// Quadrature grid on (0,1). All quantile functions in one pipeline are
// evaluated on a shared grid; integrals become weighted sums.
class ProbGrid {
 public:
  // General quadrature grid: nodes strictly increasing inside (0,1),
  // positive weights summing to one (within 1e-12).
  ProbGrid(std::vector<double> nodes, std::vector<double> weights);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  bool same_as(const ProbGrid& other) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const ProbGrid>;

// Midpoint rule on M equispaced nodes: nodes[j] = (j + 0.5)/M, weights 1/M.
// Avoids evaluating quantile functions at 0 and 1, where they may diverge.
// Requires M >= 2.
GridPtr make_grid(std::size_t m);

// An arbitrary element of the discretized function space on a grid.
class GridFunction {
 public:
  GridFunction(GridPtr grid, std::vector<double> values);

  const ProbGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

// A distribution encoded as its quantile function sampled on a grid.
// Values are monotone nondecreasing and, when bounds are finite, confined
// to [lo, hi].
class QuantileGrid {
 public:
  QuantileGrid(GridPtr grid, std::vector<double> values,
               double lo = -std::numeric_limits<double>::infinity(),
               double hi = std::numeric_limits<double>::infinity());

  const ProbGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  GridFunction to_function() const { return GridFunction(grid_, values_); }

 private:
  GridPtr grid_;
  std::vector<double> values_;
  double lo_;
  double hi_;
};

bool same_grid(const ProbGrid& a, const ProbGrid& b);

// Throws std::invalid_argument naming `op` when grids differ.
void require_same_grid(const ProbGrid& a, const ProbGrid& b, const char* op);

}  // namespace watl
