#include "watl/study.hpp"

#include <stdexcept>

#include "watl/wasserstein.hpp"

namespace watl {

Study::Study(std::string label, StudyRole role, CovariateMatrix covariates,
             std::vector<QuantileGrid> responses)
    : label_(std::move(label)),
      role_(role),
      covariates_(std::move(covariates)),
      responses_(std::move(responses)) {
  if (responses_.size() != covariates_.rows())
    throw std::invalid_argument("Study: responses length != covariate rows");
  for (const auto& q : responses_)
    require_same_grid(responses_.front().grid(), q.grid(), "Study responses");
}

Study::Study(std::string label, StudyRole role, CovariateMatrix covariates,
             std::vector<std::vector<double>> samples)
    : label_(std::move(label)),
      role_(role),
      covariates_(std::move(covariates)),
      samples_(std::move(samples)) {
  if (samples_.size() != covariates_.rows())
    throw std::invalid_argument("Study: samples length != covariate rows");
  for (const auto& s : samples_) {
    if (s.empty())
      throw std::invalid_argument("Study: empty sample vector");
  }
}

const std::vector<QuantileGrid>& Study::responses() const {
  if (sample_mode())
    throw std::invalid_argument("Study: sample-mode study has no quantile responses");
  return responses_;
}

const std::vector<std::vector<double>>& Study::samples() const {
  if (!sample_mode())
    throw std::invalid_argument("Study: quantile-mode study has no raw samples");
  return samples_;
}

GridPtr Study::response_grid() const { return responses().front().grid_ptr(); }

Study Study::materialized(const GridPtr& grid) const {
  if (!grid) throw std::invalid_argument("Study::materialized: null grid");
  if (!sample_mode()) {
    require_same_grid(*grid, responses_.front().grid(), "Study::materialized");
    return *this;
  }
  std::vector<QuantileGrid> responses;
  responses.reserve(samples_.size());
  for (const auto& s : samples_)
    responses.push_back(quantile_from_samples(s, grid));
  return Study(label_, role_, covariates_, std::move(responses));
}

Study Study::subset(const std::vector<std::size_t>& rows) const {
  CovariateMatrix x = covariates_.subset(rows);
  if (sample_mode()) {
    std::vector<std::vector<double>> samples;
    samples.reserve(rows.size());
    for (std::size_t i : rows) samples.push_back(samples_[i]);
    return Study(label_, role_, std::move(x), std::move(samples));
  }
  std::vector<QuantileGrid> responses;
  responses.reserve(rows.size());
  for (std::size_t i : rows) responses.push_back(responses_[i]);
  return Study(label_, role_, std::move(x), std::move(responses));
}

Study pool_studies(const std::vector<const Study*>& studies,
                   const std::string& label) {
  if (studies.empty())
    throw std::invalid_argument("pool_studies: no studies");
  const std::size_t p = studies.front()->p();
  std::vector<double> xdata;
  std::vector<QuantileGrid> responses;
  std::size_t n = 0;
  for (const Study* s : studies) {
    if (s->p() != p)
      throw std::invalid_argument("pool_studies: covariate dimension mismatch");
    if (s->sample_mode())
      throw std::invalid_argument("pool_studies: materialize sample-mode studies first");
    n += s->n();
    xdata.insert(xdata.end(), s->covariates().data().begin(),
                 s->covariates().data().end());
    responses.insert(responses.end(), s->responses().begin(),
                     s->responses().end());
  }
  return Study(label, StudyRole::source, CovariateMatrix(n, p, std::move(xdata)),
               std::move(responses));
}

}  // namespace watl
