#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aggregate.hpp"
#include "corpus.hpp"

namespace carescope::census {

// The seven block-group covariates, in report order.
inline constexpr std::array<std::string_view, 7> kCovariateNames = {
    "Population Density",  "Median Income",   "Rent-to-Income Ratio",
    "GINI Index",          "Household Below Poverty Rate",
    "No Insurance Rate",   "Unemployment Rate"};

struct CbgProfile {
  std::string cbg_id;  // 12-digit FIPS
  double population_density = 0.0;       // persons per square km
  double median_income = 0.0;            // USD / year
  double rent_to_income_ratio = 0.0;     // fraction of income
  double gini_index = 0.0;               // [0, 1]
  double household_below_poverty_rate = 0.0;
  double no_insurance_rate = 0.0;
  double unemployment_rate = 0.0;

  std::array<double, 7> covariates() const;
  bool valid() const;
};

struct CbgLoadResult {
  std::vector<CbgProfile> profiles;
  long n_rejected = 0;  // out-of-range rows, counted and skipped
};

// CSV with header cbg_id,population_density,median_income,rent_to_income_ratio,
// gini_index,household_below_poverty_rate,no_insurance_rate,unemployment_rate.
// A missing column is a fatal schema error.
CbgLoadResult load_cbg_profiles(const std::filesystem::path& path);

using Point = std::array<double, 2>;  // lon, lat (WGS84)

struct Ring {
  std::vector<Point> points;  // closed: first == last
};

struct CbgGeometry {
  std::string cbg_id;
  // MultiPolygon: each polygon is an outer ring followed by holes.
  std::vector<std::vector<Ring>> polygons;
};

// GeoJSON FeatureCollection with a GEOID property per feature.
std::vector<CbgGeometry> load_cbg_geojson(const std::filesystem::path& path);

// Even-odd containment, boundary inclusive.
bool geometry_contains(const CbgGeometry& geometry, Point p);

// Returns the containing cbg_id, resolving boundary/overlap ties to the
// lexicographically smallest id; nullopt when no polygon contains the point.
std::optional<std::string> assign_cbg(Point p, std::span<const CbgGeometry> geometries);

// z-score with the sample (n-1) standard deviation. Throws ZeroVarianceError
// (naming the variable) on constant input; requires n >= 2.
std::vector<double> zscore(std::span<const double> values, std::string_view label = "values");

struct EnrichedProfile {
  agg::FacilityAspectProfile profile;
  CbgProfile cbg;
};

struct JoinResult {
  std::vector<EnrichedProfile> enriched;  // sorted by facility_id
  long n_unassigned = 0;   // no polygon contains the facility
  long n_missing_cbg = 0;  // assigned, but no covariate row for the cbg
};

// Geometry-based join: facility coordinates come from the facility set.
JoinResult join_covariates(std::span<const agg::FacilityAspectProfile> profiles,
                           const corpus::FacilitySet& facilities,
                           std::span<const CbgProfile> cbg_profiles,
                           std::span<const CbgGeometry> geometries);

// Alternate join path: a precomputed facility_id,cbg_id table.
JoinResult join_covariates_mapped(std::span<const agg::FacilityAspectProfile> profiles,
                                  const std::map<std::string, std::string>& facility_to_cbg,
                                  std::span<const CbgProfile> cbg_profiles);

std::map<std::string, std::string> load_facility_cbg_csv(const std::filesystem::path& path);

nlohmann::json enriched_to_json(const EnrichedProfile& e);
EnrichedProfile enriched_from_json(const nlohmann::json& j);

}  // namespace carescope::census
