#include "watl/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace watl {

namespace {

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x))
      throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

}  // namespace

ProbGrid::ProbGrid(std::vector<double> nodes, std::vector<double> weights)
    : nodes_(std::move(nodes)), weights_(std::move(weights)) {
  if (nodes_.size() < 2)
    throw std::invalid_argument("ProbGrid: need at least 2 nodes");
  if (weights_.size() != nodes_.size())
    throw std::invalid_argument("ProbGrid: nodes/weights size mismatch");
  require_finite(nodes_, "ProbGrid nodes");
  double sum = 0.0;
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    if (!(nodes_[j] > 0.0 && nodes_[j] < 1.0))
      throw std::invalid_argument("ProbGrid: nodes must lie in (0,1)");
    if (j > 0 && !(nodes_[j] > nodes_[j - 1]))
      throw std::invalid_argument("ProbGrid: nodes must be strictly increasing");
    if (!(weights_[j] > 0.0) || !std::isfinite(weights_[j]))
      throw std::invalid_argument("ProbGrid: weights must be positive");
    sum += weights_[j];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("ProbGrid: weights must sum to 1");
}

bool ProbGrid::same_as(const ProbGrid& other) const {
  return this == &other ||
         (nodes_ == other.nodes_ && weights_ == other.weights_);
}

GridPtr make_grid(std::size_t m) {
  if (m < 2) throw std::invalid_argument("make_grid: M must be at least 2");
  std::vector<double> nodes(m), weights(m, 1.0 / static_cast<double>(m));
  for (std::size_t j = 0; j < m; ++j)
    nodes[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
  return std::make_shared<const ProbGrid>(std::move(nodes), std::move(weights));
}

GridFunction::GridFunction(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw std::invalid_argument("GridFunction: null grid");
  if (values_.size() != grid_->size())
    throw std::invalid_argument("GridFunction: values length != grid size");
  require_finite(values_, "GridFunction values");
}

QuantileGrid::QuantileGrid(GridPtr grid, std::vector<double> values, double lo,
                           double hi)
    : grid_(std::move(grid)), values_(std::move(values)), lo_(lo), hi_(hi) {
  if (!grid_) throw std::invalid_argument("QuantileGrid: null grid");
  if (values_.size() != grid_->size())
    throw std::invalid_argument("QuantileGrid: values length != grid size");
  require_finite(values_, "QuantileGrid values");
  if (std::isnan(lo_) || std::isnan(hi_) || !(lo_ <= hi_))
    throw std::invalid_argument("QuantileGrid: invalid support bounds");
  for (std::size_t j = 0; j < values_.size(); ++j) {
    if (j > 0 && values_[j] < values_[j - 1])
      throw std::invalid_argument(
          "QuantileGrid: values must be monotone nondecreasing");
    if (values_[j] < lo_ || values_[j] > hi_)
      throw std::invalid_argument("QuantileGrid: value outside support bounds");
  }
}

bool same_grid(const ProbGrid& a, const ProbGrid& b) { return a.same_as(b); }

void require_same_grid(const ProbGrid& a, const ProbGrid& b, const char* op) {
  if (!a.same_as(b))
    throw std::invalid_argument(std::string(op) + ": grid mismatch");
}

}  // namespace watl
