#pragma once

#include <string>
#include <vector>

#include "watl/covariates.hpp"
#include "watl/grid.hpp"

namespace watl {

enum class StudyRole { target, source };

// One data site: a covariate matrix plus one distributional response per
// row. Responses are either quantile functions on a shared grid or raw
// sample vectors (empirical-measure mode).
class Study {
 public:
  // Quantile mode: one QuantileGrid per covariate row, all on one grid.
  Study(std::string label, StudyRole role, CovariateMatrix covariates,
        std::vector<QuantileGrid> responses);

  // Empirical-measure mode: one nonempty sample vector per covariate row.
  Study(std::string label, StudyRole role, CovariateMatrix covariates,
        std::vector<std::vector<double>> samples);

  const std::string& label() const { return label_; }
  StudyRole role() const { return role_; }
  std::size_t n() const { return covariates_.rows(); }
  std::size_t p() const { return covariates_.cols(); }
  const CovariateMatrix& covariates() const { return covariates_; }

  bool sample_mode() const { return !samples_.empty(); }
  const std::vector<QuantileGrid>& responses() const;
  const std::vector<std::vector<double>>& samples() const;
  GridPtr response_grid() const;  // quantile mode only

  // Quantile-mode copy of this study on `grid`. In sample mode each raw
  // sample is replaced by its empirical quantile function; in quantile mode
  // the responses must already live on `grid`.
  Study materialized(const GridPtr& grid) const;

  // Row subset (e.g. cross-validation folds); preserves mode.
  Study subset(const std::vector<std::size_t>& rows) const;

 private:
  std::string label_;
  StudyRole role_;
  CovariateMatrix covariates_;
  std::vector<QuantileGrid> responses_;
  std::vector<std::vector<double>> samples_;
};

// Concatenates rows of several studies into one (shared p and, in quantile
// mode, a shared grid). Used for the pooled baselines.
Study pool_studies(const std::vector<const Study*>& studies,
                   const std::string& label);

}  // namespace watl
