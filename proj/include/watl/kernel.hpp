#pragma once

#include <cmath>
#include <stdexcept>

namespace watl {

enum class KernelFamily { gaussian, epanechnikov };

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double h = 0.0;  // bandwidth, must be positive when used

  void validate() const {
    if (!(h > 0.0) || !std::isfinite(h))
      throw std::invalid_argument("KernelSpec: bandwidth must be positive");
  }

  double density(double u) const {
    switch (family) {
      case KernelFamily::gaussian:
        return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
      case KernelFamily::epanechnikov:
        return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    }
    return 0.0;
  }

  // K_h(v) = K(v/h)/h
  double scaled(double v) const { return density(v / h) / h; }
};

}  // namespace watl
