#include "watl/config.hpp"

#include <cmath>

namespace watl {

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  grid.reserve(31);
  for (int i = 0; i <= 30; ++i) grid.push_back(static_cast<double>(i) / 10.0);
  return grid;
}

double theory_lambda(std::size_t n0, double eps) {
  return std::pow(static_cast<double>(n0), -0.5 + eps);
}

}  // namespace watl
