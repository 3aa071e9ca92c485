#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace watl {

// Dense n x p covariate matrix, row major. Entries must be finite, n and p
// at least one.
class CovariateMatrix {
 public:
  CovariateMatrix(std::size_t n, std::size_t p, std::vector<double> row_major);

  static CovariateMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return p_; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * p_ + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * p_, p_};
  }
  const std::vector<double>& data() const { return data_; }

  CovariateMatrix subset(const std::vector<std::size_t>& row_indices) const;

 private:
  std::size_t n_;
  std::size_t p_;
  std::vector<double> data_;
};

}  // namespace watl
