#include "watl/covariates.hpp"

#include <cmath>
#include <stdexcept>

namespace watl {

CovariateMatrix::CovariateMatrix(std::size_t n, std::size_t p,
                                 std::vector<double> row_major)
    : n_(n), p_(p), data_(std::move(row_major)) {
  if (n_ < 1 || p_ < 1)
    throw std::invalid_argument("CovariateMatrix: need n >= 1 and p >= 1");
  if (data_.size() != n_ * p_)
    throw std::invalid_argument("CovariateMatrix: data size != n*p");
  for (double x : data_) {
    if (!std::isfinite(x))
      throw std::invalid_argument("CovariateMatrix: non-finite entry");
  }
}

CovariateMatrix CovariateMatrix::from_rows(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty())
    throw std::invalid_argument("CovariateMatrix: no rows");
  const std::size_t p = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * p);
  for (const auto& r : rows) {
    if (r.size() != p)
      throw std::invalid_argument("CovariateMatrix: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return CovariateMatrix(rows.size(), p, std::move(data));
}

CovariateMatrix CovariateMatrix::subset(
    const std::vector<std::size_t>& row_indices) const {
  std::vector<double> data;
  data.reserve(row_indices.size() * p_);
  for (std::size_t i : row_indices) {
    if (i >= n_)
      throw std::invalid_argument("CovariateMatrix::subset: index out of range");
    data.insert(data.end(), data_.begin() + i * p_, data_.begin() + (i + 1) * p_);
  }
  return CovariateMatrix(row_indices.size(), p_, std::move(data));
}

}  // namespace watl
