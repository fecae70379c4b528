#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "absa.hpp"
#include "corpus.hpp"

namespace carescope::agg {

using absa::Aspect;
using absa::AspectSentimentSet;

struct FacilityAspectProfile {
  std::string facility_id;
  corpus::Region region = corpus::Region::kOther;
  double mean_rating = 0.0;  // over text-bearing reviews
  // aspect_mean holds an entry only when the matching count is positive.
  std::map<Aspect, double> aspect_mean;
  std::map<Aspect, long> aspect_count;
  long n_text_reviews = 0;

  bool has_all_aspects() const;
  long count_of(Aspect a) const;
};

struct ProfilesResult {
  std::vector<FacilityAspectProfile> profiles;  // sorted by facility_id
  long n_skipped_no_text = 0;
};

// Rolls review-level sentiment up to per-facility means. A facility without
// any text-bearing review is omitted and counted.
ProfilesResult facility_profiles(
    const corpus::FacilitySet& facilities, const corpus::ReviewSet& reviews,
    const std::map<std::string, AspectSentimentSet>& sentiments);

struct FilterPolicy {
  std::map<Aspect, long> min_per_aspect;

  static FilterPolicy uniform(long threshold);
  // Same thresholds with the Finances requirement removed.
  FilterPolicy relaxed_finances() const;

  bool operator==(const FilterPolicy&) const = default;
};

// Retains profiles meeting every per-aspect minimum (inclusive).
std::vector<FacilityAspectProfile> apply_filter(
    std::span<const FacilityAspectProfile> profiles, const FilterPolicy& policy);

struct BoxStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double lo_fence = 0.0;  // q1 - 1.5*IQR
  double hi_fence = 0.0;  // q3 + 1.5*IQR
  long n = 0;
};

// Type-7 (linear interpolation) quantile of an ascending-sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);
BoxStats box_stats(std::vector<double> values);

struct RegionAspectSummary {
  corpus::Region region = corpus::Region::kOther;
  long n_facilities = 0;
  long n_text_reviews = 0;
  double mean_rating = 0.0;  // review-weighted
  // Review-weighted mean over every aspect-mentioning review in the region.
  std::map<Aspect, double> review_weighted_mean;
  std::map<Aspect, long> review_count;
  // Distribution of per-facility means, for box plots.
  std::map<Aspect, BoxStats> facility_mean_box;
};

// Regions with zero facilities are omitted.
std::vector<RegionAspectSummary> region_summary(
    std::span<const FacilityAspectProfile> profiles, const corpus::ReviewSet& reviews,
    const std::map<std::string, AspectSentimentSet>& sentiments);

nlohmann::json profile_to_json(const FacilityAspectProfile& p);
FacilityAspectProfile profile_from_json(const nlohmann::json& j);
std::string profiles_to_csv(std::span<const FacilityAspectProfile> profiles);
nlohmann::json region_summaries_to_json(std::span<const RegionAspectSummary> summaries);

}  // namespace carescope::agg
