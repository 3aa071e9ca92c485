#include "watl/frechet.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "watl/errors.hpp"

namespace watl {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

MomentCache::MomentCache(const CovariateMatrix& x,
                         std::optional<double> ridge) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto p = static_cast<Eigen::Index>(x.cols());
  Eigen::Map<const RowMajorMatrix> xm(x.data().data(), n, p);

  Eigen::VectorXd mean = xm.colwise().mean();
  RowMajorMatrix centered = xm.rowwise() - mean.transpose();
  RowMajorMatrix cov =
      (centered.transpose() * centered) / static_cast<double>(n);

  double eps;
  if (ridge.has_value()) {
    eps = *ridge;
    if (eps < 0.0 || !std::isfinite(eps))
      throw std::invalid_argument("MomentCache: ridge must be nonnegative");
  } else {
    eps = 1e-8 * cov.trace() / static_cast<double>(p);
  }

  RowMajorMatrix ridged = cov;
  ridged.diagonal().array() += eps;
  Eigen::LLT<RowMajorMatrix> llt(ridged);
  if (llt.info() != Eigen::Success)
    throw singular_matrix_error(
        "MomentCache: covariance + ridge is not positive definite");
  RowMajorMatrix inv =
      llt.solve(RowMajorMatrix::Identity(p, p));

  mean_.assign(mean.data(), mean.data() + p);
  cov_.assign(cov.data(), cov.data() + p * p);
  cov_inv_.assign(inv.data(), inv.data() + p * p);
  ridge_ = eps;
}

std::vector<double> global_weights(const CovariateMatrix& x_mat,
                                   std::span<const double> x,
                                   const MomentCache& moments) {
  const std::size_t n = x_mat.rows();
  const std::size_t p = x_mat.cols();
  if (x.size() != p)
    throw std::invalid_argument("global_weights: query dimension mismatch");
  if (moments.dim() != p)
    throw std::invalid_argument("global_weights: moment dimension mismatch");

  std::vector<double> w(n, 1.0);
  if (n == 1) return w;  // centered row is zero, quadratic form vanishes

  // v = cov_inv * (x - mean), then s_i = 1 + <X_i - mean, v>
  std::vector<double> v(p, 0.0);
  for (std::size_t a = 0; a < p; ++a) {
    double acc = 0.0;
    for (std::size_t b = 0; b < p; ++b)
      acc += moments.cov_inv()[a * p + b] * (x[b] - moments.mean()[b]);
    v[a] = acc;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    auto row = x_mat.row(i);
    for (std::size_t a = 0; a < p; ++a)
      acc += (row[a] - moments.mean()[a]) * v[a];
    w[i] = 1.0 + acc;
  }
  return w;
}

std::vector<double> global_weights(const CovariateMatrix& x_mat,
                                   std::span<const double> x,
                                   std::optional<double> ridge) {
  if (x_mat.rows() == 1) {
    if (x.size() != x_mat.cols())
      throw std::invalid_argument("global_weights: query dimension mismatch");
    return {1.0};
  }
  MomentCache moments(x_mat, ridge);
  return global_weights(x_mat, x, moments);
}

std::vector<double> local_weights(const CovariateMatrix& x_mat, double x,
                                  const KernelSpec& kernel) {
  if (x_mat.cols() != 1)
    throw std::invalid_argument(
        "local_weights: requires a scalar predictor (p == 1)");
  kernel.validate();
  if (!std::isfinite(x))
    throw std::invalid_argument("local_weights: non-finite query");

  const std::size_t n = x_mat.rows();
  double u0 = 0.0, u1 = 0.0, u2 = 0.0;
  std::vector<double> k(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = x_mat(i, 0) - x;
    k[i] = kernel.scaled(d[i]);
    u0 += k[i];
    u1 += k[i] * d[i];
    u2 += k[i] * d[i] * d[i];
  }
  const double dn = static_cast<double>(n);
  u0 /= dn;
  u1 /= dn;
  u2 /= dn;

  const double sigma0 = u0 * u2 - u1 * u1;
  if (!(sigma0 > 1e-10 * u0 * u2) || !std::isfinite(sigma0))
    throw degenerate_window_error(
        "local_weights: window variance collapsed; widen the bandwidth");

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = k[i] * (u2 - u1 * d[i]) / sigma0;
  return w;
}

GridFunction weighted_quantile_estimate(std::span<const double> weights,
                                        const std::vector<QuantileGrid>& qs) {
  if (qs.empty())
    throw std::invalid_argument("weighted_quantile_estimate: empty list");
  if (weights.size() != qs.size())
    throw std::invalid_argument("weighted_quantile_estimate: length mismatch");

  const GridPtr& grid = qs.front().grid_ptr();
  std::vector<double> values(grid->size(), 0.0);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    require_same_grid(*grid, qs[i].grid(), "weighted_quantile_estimate");
    const double wi = weights[i];
    const auto& v = qs[i].values();
    for (std::size_t j = 0; j < values.size(); ++j) values[j] += wi * v[j];
  }
  const double inv_n = 1.0 / static_cast<double>(qs.size());
  for (double& x : values) x *= inv_n;
  return GridFunction(grid, std::move(values));
}

QuantileGrid baseline_predict(const Study& study, std::span<const double> x,
                              const TransferConfig& config) {
  if (study.n() == 0)
    throw std::invalid_argument("baseline_predict: empty study");
  const Study* working = &study;
  std::optional<Study> storage;
  if (study.sample_mode()) {
    storage = study.materialized(make_grid(config.grid_size));
    working = &*storage;
  }

  std::vector<double> w;
  if (config.mode == RegressionMode::global) {
    w = global_weights(working->covariates(), x, config.ridge);
  } else {
    if (working->p() != 1)
      throw std::invalid_argument(
          "baseline_predict: local mode requires a scalar predictor");
    w = local_weights(working->covariates(), x[0], config.kernel);
  }
  GridFunction est = weighted_quantile_estimate(w, working->responses());
  return project_to_quantile(est, config.support_lo, config.support_hi);
}

}  // namespace watl
