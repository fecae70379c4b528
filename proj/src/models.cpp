#include "carescope/models.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

#include "carescope/util.hpp"

namespace carescope::stats {

namespace {

using absa::Aspect;
using agg::FacilityAspectProfile;
using census::EnrichedProfile;

std::vector<double> aspect_means_column(std::span<const FacilityAspectProfile> profiles,
                                        Aspect aspect) {
  std::vector<double> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) {
    auto it = p.aspect_mean.find(aspect);
    if (it == p.aspect_mean.end())
      throw StatsError("profile " + p.facility_id + " lacks a mean for " +
                       std::string(absa::aspect_name(aspect)) +
                       "; apply the review-count filter first");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

std::vector<std::string> aspect_column_names() {
  std::vector<std::string> names;
  for (Aspect a : absa::kAllAspects) names.emplace_back(absa::aspect_name(a));
  return names;
}

RegressionFit fit_model1(std::span<const FacilityAspectProfile> profiles) {
  const long n = static_cast<long>(profiles.size());
  DesignMatrix design;
  design.intercept_included = true;
  design.column_names = aspect_column_names();
  design.column_names.emplace_back("Intercept");
  design.values.resize(n, 6);

  std::vector<double> y;
  y.reserve(profiles.size());
  for (const auto& p : profiles) y.push_back(p.mean_rating);

  long col = 0;
  for (Aspect a : absa::kAllAspects) {
    const auto column = aspect_means_column(profiles, a);
    design.values.col(col++) = Eigen::Map<const Eigen::VectorXd>(column.data(), n);
  }
  design.values.col(col).setOnes();
  return ols_fit(design, y);
}

RegressionFit fit_model2(std::span<const EnrichedProfile> profiles) {
  const long n = static_cast<long>(profiles.size());
  DesignMatrix design;
  design.intercept_included = true;
  for (Aspect a : absa::kAllAspects) design.column_names.emplace_back(absa::aspect_name(a));
  for (auto name : census::kCovariateNames) design.column_names.emplace_back(name);
  design.column_names.emplace_back("Intercept");
  design.values.resize(n, 13);

  std::vector<double> y;
  y.reserve(profiles.size());
  for (const auto& e : profiles) y.push_back(e.profile.mean_rating);

  long col = 0;
  for (Aspect a : absa::kAllAspects) {
    std::vector<double> column;
    column.reserve(profiles.size());
    for (const auto& e : profiles) {
      auto it = e.profile.aspect_mean.find(a);
      if (it == e.profile.aspect_mean.end())
        throw StatsError("profile " + e.profile.facility_id + " lacks a mean for " +
                         std::string(absa::aspect_name(a)));
      column.push_back(it->second);
    }
    design.values.col(col++) = Eigen::Map<const Eigen::VectorXd>(column.data(), n);
  }
  for (int k = 0; k < 7; ++k) {
    std::vector<double> raw;
    raw.reserve(profiles.size());
    for (const auto& e : profiles) raw.push_back(e.cbg.covariates()[k]);
    const auto z = census::zscore(raw, census::kCovariateNames[k]);
    design.values.col(col++) = Eigen::Map<const Eigen::VectorXd>(z.data(), n);
  }
  design.values.col(col).setOnes();
  return ols_fit(design, y);
}

RegressionFit fit_interactions(std::span<const EnrichedProfile> profiles) {
  const long n = static_cast<long>(profiles.size());
  DesignMatrix design;
  design.intercept_included = true;
  for (Aspect a : absa::kAllAspects) design.column_names.emplace_back(absa::aspect_name(a));
  for (auto name : census::kCovariateNames) design.column_names.emplace_back(name);
  design.column_names.emplace_back("Interpersonal Factors x Operational Efficiency");
  design.column_names.emplace_back("Interpersonal Factors x Population Density");
  design.column_names.emplace_back("Operational Efficiency x Population Density");
  design.column_names.emplace_back("Intercept");
  design.values.resize(n, 16);

  std::vector<double> y;
  y.reserve(profiles.size());
  for (const auto& e : profiles) y.push_back(e.profile.mean_rating);

  // All predictors centered; products of centered columns.
  std::map<Aspect, std::vector<double>> centered_aspect;
  for (Aspect a : absa::kAllAspects) {
    std::vector<double> column;
    column.reserve(profiles.size());
    for (const auto& e : profiles) {
      auto it = e.profile.aspect_mean.find(a);
      if (it == e.profile.aspect_mean.end())
        throw StatsError("profile " + e.profile.facility_id + " lacks a mean for " +
                         std::string(absa::aspect_name(a)));
      column.push_back(it->second);
    }
    centered_aspect[a] = center(column);
  }
  std::array<std::vector<double>, 7> z_covariates;
  for (int k = 0; k < 7; ++k) {
    std::vector<double> raw;
    raw.reserve(profiles.size());
    for (const auto& e : profiles) raw.push_back(e.cbg.covariates()[k]);
    // z-scored covariates already have mean zero.
    z_covariates[k] = census::zscore(raw, census::kCovariateNames[k]);
  }

  long col = 0;
  for (Aspect a : absa::kAllAspects)
    design.values.col(col++) =
        Eigen::Map<const Eigen::VectorXd>(centered_aspect[a].data(), n);
  for (int k = 0; k < 7; ++k)
    design.values.col(col++) =
        Eigen::Map<const Eigen::VectorXd>(z_covariates[k].data(), n);

  const auto& interp = centered_aspect[Aspect::kInterpersonal];
  const auto& opeff = centered_aspect[Aspect::kOperationalEfficiency];
  const auto& density = z_covariates[0];
  for (long i = 0; i < n; ++i) design.values(i, col) = interp[i] * opeff[i];
  ++col;
  for (long i = 0; i < n; ++i) design.values(i, col) = interp[i] * density[i];
  ++col;
  for (long i = 0; i < n; ++i) design.values(i, col) = opeff[i] * density[i];
  ++col;
  design.values.col(col).setOnes();
  return ols_fit(design, y);
}

namespace {

// Model 2 without the Finances predictor, for the expanded sample.
RegressionFit fit_model2_excluding_finances(std::span<const EnrichedProfile> profiles) {
  const long n = static_cast<long>(profiles.size());
  DesignMatrix design;
  design.intercept_included = true;
  std::vector<Aspect> aspects;
  for (Aspect a : absa::kAllAspects)
    if (a != Aspect::kFinances) aspects.push_back(a);
  for (Aspect a : aspects) design.column_names.emplace_back(absa::aspect_name(a));
  for (auto name : census::kCovariateNames) design.column_names.emplace_back(name);
  design.column_names.emplace_back("Intercept");
  design.values.resize(n, 12);

  std::vector<double> y;
  y.reserve(profiles.size());
  for (const auto& e : profiles) y.push_back(e.profile.mean_rating);

  long col = 0;
  for (Aspect a : aspects) {
    std::vector<double> column;
    column.reserve(profiles.size());
    for (const auto& e : profiles) {
      auto it = e.profile.aspect_mean.find(a);
      if (it == e.profile.aspect_mean.end())
        throw StatsError("profile " + e.profile.facility_id + " lacks a mean for " +
                         std::string(absa::aspect_name(a)));
      column.push_back(it->second);
    }
    design.values.col(col++) = Eigen::Map<const Eigen::VectorXd>(column.data(), n);
  }
  for (int k = 0; k < 7; ++k) {
    std::vector<double> raw;
    raw.reserve(profiles.size());
    for (const auto& e : profiles) raw.push_back(e.cbg.covariates()[k]);
    const auto z = census::zscore(raw, census::kCovariateNames[k]);
    design.values.col(col++) = Eigen::Map<const Eigen::VectorXd>(z.data(), n);
  }
  design.values.col(col).setOnes();
  return ols_fit(design, y);
}

std::vector<EnrichedProfile> filter_enriched(std::span<const EnrichedProfile> profiles,
                                             const agg::FilterPolicy& policy) {
  std::vector<EnrichedProfile> out;
  for (const auto& e : profiles) {
    bool keep = true;
    for (const auto& [aspect, threshold] : policy.min_per_aspect) {
      if (e.profile.count_of(aspect) < threshold) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(e);
  }
  return out;
}

}  // namespace

SensitivityResult sensitivity_run(std::span<const EnrichedProfile> unfiltered,
                                  const agg::FilterPolicy& strict_policy,
                                  const agg::FilterPolicy& relaxed_policy) {
  agg::FilterPolicy expected = strict_policy;
  expected.min_per_aspect[Aspect::kFinances] = 0;
  agg::FilterPolicy relaxed_normalized = relaxed_policy;
  relaxed_normalized.min_per_aspect.try_emplace(Aspect::kFinances, 0);
  if (relaxed_normalized != expected)
    throw UsageError("sensitivity_run: relaxed policy must drop only the Finances threshold");

  const auto strict_sample = filter_enriched(unfiltered, strict_policy);
  const auto relaxed_sample = filter_enriched(unfiltered, relaxed_normalized);

  SensitivityResult out;
  out.n_strict = static_cast<long>(strict_sample.size());
  out.n_relaxed = static_cast<long>(relaxed_sample.size());
  out.strict_fit = fit_model2(strict_sample);
  out.relaxed_fit = fit_model2_excluding_finances(relaxed_sample);
  return out;
}

VifReport model2_vif(std::span<const EnrichedProfile> profiles) {
  const long n = static_cast<long>(profiles.size());
  DesignMatrix design;
  design.intercept_included = false;
  for (Aspect a : absa::kAllAspects) design.column_names.emplace_back(absa::aspect_name(a));
  for (auto name : census::kCovariateNames) design.column_names.emplace_back(name);
  design.values.resize(n, 12);

  long col = 0;
  for (Aspect a : absa::kAllAspects) {
    std::vector<double> column;
    column.reserve(profiles.size());
    for (const auto& e : profiles) {
      auto it = e.profile.aspect_mean.find(a);
      if (it == e.profile.aspect_mean.end())
        throw StatsError("profile " + e.profile.facility_id + " lacks a mean for " +
                         std::string(absa::aspect_name(a)));
      column.push_back(it->second);
    }
    design.values.col(col++) = Eigen::Map<const Eigen::VectorXd>(column.data(), n);
  }
  for (int k = 0; k < 7; ++k) {
    std::vector<double> raw;
    raw.reserve(profiles.size());
    for (const auto& e : profiles) raw.push_back(e.cbg.covariates()[k]);
    const auto z = census::zscore(raw, census::kCovariateNames[k]);
    design.values.col(col++) = Eigen::Map<const Eigen::VectorXd>(z.data(), n);
  }
  return vif(design);
}

CorrMatrixResult corr_matrix(std::span<const FacilityAspectProfile> profiles,
                             bool by_region) {
  CorrMatrixResult result;

  auto build = [&](std::string label,
                   std::span<const FacilityAspectProfile> sample) -> bool {
    if (sample.size() < 3) return false;
    CorrMatrix m;
    m.label = std::move(label);
    m.names = aspect_column_names();
    m.names.emplace_back("Rating");

    std::vector<std::vector<double>> columns;
    for (Aspect a : absa::kAllAspects) columns.push_back(aspect_means_column(sample, a));
    std::vector<double> rating;
    rating.reserve(sample.size());
    for (const auto& p : sample) rating.push_back(p.mean_rating);
    columns.push_back(std::move(rating));

    const std::size_t k = columns.size();
    m.cells.assign(k, std::vector<CorrelationResult>(k));
    for (std::size_t i = 0; i < k; ++i) {
      m.cells[i][i] = {1.0, 0.0, static_cast<long>(sample.size())};
      for (std::size_t j = i + 1; j < k; ++j) {
        const CorrelationResult c = pearson(columns[i], columns[j]);
        m.cells[i][j] = c;
        m.cells[j][i] = c;
      }
    }
    result.matrices.push_back(std::move(m));
    return true;
  };

  if (!by_region) {
    if (!build("ALL", profiles))
      throw InsufficientDataError("corr_matrix: need at least 3 profiles");
    return result;
  }

  std::map<corpus::Region, std::vector<FacilityAspectProfile>> grouped;
  for (const auto& p : profiles) grouped[p.region].push_back(p);
  for (const auto& [region, sample] : grouped) {
    const std::string label(corpus::region_name(region));
    if (!build(label, sample))
      result.warnings.push_back("region " + label + " skipped: fewer than 3 profiles");
  }
  return result;
}

nlohmann::json corr_matrices_to_json(const CorrMatrixResult& result) {
  nlohmann::json matrices = nlohmann::json::array();
  for (const auto& m : result.matrices) {
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t i = 0; i < m.names.size(); ++i) {
      for (std::size_t j = 0; j < m.names.size(); ++j) {
        cells.push_back({{"x", m.names[i]},
                         {"y", m.names[j]},
                         {"r", m.cells[i][j].r},
                         {"p", m.cells[i][j].p_value},
                         {"n", m.cells[i][j].n}});
      }
    }
    matrices.push_back({{"label", m.label}, {"names", m.names}, {"cells", cells}});
  }
  return nlohmann::json{{"matrices", matrices},
                        {"warnings", result.warnings}};
}

}  // namespace carescope::stats
