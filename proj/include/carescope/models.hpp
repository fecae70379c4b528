#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aggregate.hpp"
#include "census.hpp"
#include "stats.hpp"

namespace carescope::stats {

// Fixed predictor order for the sentiment columns.
std::vector<std::string> aspect_column_names();

// mean_rating regressed on the five aspect means plus an intercept.
// Every profile must have all five aspect means defined.
RegressionFit fit_model1(std::span<const agg::FacilityAspectProfile> profiles);

// Adds the seven block-group covariates (z-scored over the fitting sample)
// after the aspect columns; intercept last.
RegressionFit fit_model2(std::span<const census::EnrichedProfile> profiles);

// Model 2 with all predictors centered plus three interaction columns:
// interpersonal x operational efficiency, interpersonal x population
// density, operational efficiency x population density. Products are formed
// after centering.
RegressionFit fit_interactions(std::span<const census::EnrichedProfile> profiles);

struct SensitivityResult {
  RegressionFit strict_fit;   // Model 2 on the strict sample
  RegressionFit relaxed_fit;  // Finances predictor removed, expanded sample
  long n_strict = 0;
  long n_relaxed = 0;
};

// Applies the strict policy and its Finances-relaxed variant to the same
// unfiltered sample. The relaxed policy must differ from the strict one only
// in the Finances threshold.
SensitivityResult sensitivity_run(std::span<const census::EnrichedProfile> unfiltered,
                                  const agg::FilterPolicy& strict_policy,
                                  const agg::FilterPolicy& relaxed_policy);

// VIF for the Model 2 predictor block (no intercept) on the given sample.
VifReport model2_vif(std::span<const census::EnrichedProfile> profiles);

struct CorrMatrix {
  std::string label;  // "ALL" or a region name
  std::vector<std::string> names;
  std::vector<std::vector<CorrelationResult>> cells;
};

struct CorrMatrixResult {
  std::vector<CorrMatrix> matrices;
  std::vector<std::string> warnings;  // regions skipped for n < 3
};

// Pairwise correlations over the five aspect means and mean_rating; pooled,
// or stratified by region when by_region is set.
CorrMatrixResult corr_matrix(std::span<const agg::FacilityAspectProfile> profiles,
                             bool by_region);

nlohmann::json corr_matrices_to_json(const CorrMatrixResult& result);

}  // namespace carescope::stats
