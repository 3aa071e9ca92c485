#pragma once

namespace watl {

// Standard normal CDF via erfc; accurate over the full double range.
double normal_cdf(double z);

// Inverse standard normal CDF for p in (0,1). Acklam's rational
// approximation followed by one Halley refinement; absolute error is well
// below 1e-9 everywhere.
double normal_quantile(double p);

// Quantile of N(mu, sigma2) truncated to (a, b), evaluated at u in (0,1):
//   mu + sigma * Phi^{-1}( Phi(alpha) + u * (Phi(beta) - Phi(alpha)) )
// with alpha = (a - mu)/sigma, beta = (b - mu)/sigma.
double truncated_normal_quantile(double mu, double sigma2, double a, double b,
                                 double u);

}  // namespace watl
