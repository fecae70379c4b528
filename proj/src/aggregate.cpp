#include "carescope/aggregate.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "carescope/util.hpp"

namespace carescope::agg {

using nlohmann::json;

bool FacilityAspectProfile::has_all_aspects() const {
  return aspect_mean.size() == absa::kAllAspects.size();
}

long FacilityAspectProfile::count_of(Aspect a) const {
  auto it = aspect_count.find(a);
  return it == aspect_count.end() ? 0 : it->second;
}

ProfilesResult facility_profiles(
    const corpus::FacilitySet& facilities, const corpus::ReviewSet& reviews,
    const std::map<std::string, AspectSentimentSet>& sentiments) {
  struct Accum {
    double rating_sum = 0.0;
    long n_text = 0;
    std::map<Aspect, double> score_sum;
    std::map<Aspect, long> score_count;
  };
  std::unordered_map<std::string, Accum> by_facility;
  std::unordered_map<std::string, const corpus::Facility*> facility_index;
  for (const auto& f : facilities.items) facility_index[f.facility_id] = &f;

  for (const auto& r : reviews.items) {
    if (!facility_index.contains(r.facility_id)) continue;  // orphan
    if (!r.has_text()) continue;
    Accum& acc = by_facility[r.facility_id];
    acc.rating_sum += r.rating;
    ++acc.n_text;
    auto sentiment = sentiments.find(r.review_id);
    if (sentiment == sentiments.end()) continue;  // unclassified or failed
    for (const auto& [aspect, polarity] : sentiment->second.labels) {
      acc.score_sum[aspect] += absa::polarity_to_score(polarity);
      ++acc.score_count[aspect];
    }
  }

  ProfilesResult out;
  for (const auto& f : facilities.items) {
    auto it = by_facility.find(f.facility_id);
    if (it == by_facility.end() || it->second.n_text == 0) {
      ++out.n_skipped_no_text;
      continue;
    }
    const Accum& acc = it->second;
    FacilityAspectProfile p;
    p.facility_id = f.facility_id;
    p.region = f.region;
    p.n_text_reviews = acc.n_text;
    p.mean_rating = acc.rating_sum / static_cast<double>(acc.n_text);
    for (Aspect a : absa::kAllAspects) {
      auto c = acc.score_count.find(a);
      const long count = c == acc.score_count.end() ? 0 : c->second;
      p.aspect_count[a] = count;
      if (count > 0) p.aspect_mean[a] = acc.score_sum.at(a) / static_cast<double>(count);
    }
    out.profiles.push_back(std::move(p));
  }
  std::sort(out.profiles.begin(), out.profiles.end(),
            [](const FacilityAspectProfile& a, const FacilityAspectProfile& b) {
              return a.facility_id < b.facility_id;
            });
  return out;
}

FilterPolicy FilterPolicy::uniform(long threshold) {
  FilterPolicy p;
  for (Aspect a : absa::kAllAspects) p.min_per_aspect[a] = threshold;
  return p;
}

FilterPolicy FilterPolicy::relaxed_finances() const {
  FilterPolicy p = *this;
  p.min_per_aspect[Aspect::kFinances] = 0;
  return p;
}

std::vector<FacilityAspectProfile> apply_filter(
    std::span<const FacilityAspectProfile> profiles, const FilterPolicy& policy) {
  std::vector<FacilityAspectProfile> out;
  for (const auto& p : profiles) {
    bool keep = true;
    for (const auto& [aspect, threshold] : policy.min_per_aspect) {
      if (p.count_of(aspect) < threshold) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(p);
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats b;
  b.n = static_cast<long>(values.size());
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  b.median = quantile_sorted(values, 0.5);
  b.q1 = quantile_sorted(values, 0.25);
  b.q3 = quantile_sorted(values, 0.75);
  const double iqr = b.q3 - b.q1;
  b.lo_fence = b.q1 - 1.5 * iqr;
  b.hi_fence = b.q3 + 1.5 * iqr;
  return b;
}

std::vector<RegionAspectSummary> region_summary(
    std::span<const FacilityAspectProfile> profiles, const corpus::ReviewSet& reviews,
    const std::map<std::string, AspectSentimentSet>& sentiments) {
  std::unordered_map<std::string, corpus::Region> region_of;
  for (const auto& p : profiles) region_of[p.facility_id] = p.region;

  struct Accum {
    long n_facilities = 0;
    long n_text_reviews = 0;
    double rating_sum = 0.0;
    std::map<Aspect, double> score_sum;
    std::map<Aspect, long> score_count;
    std::map<Aspect, std::vector<double>> facility_means;
  };
  std::map<corpus::Region, Accum> by_region;

  for (const auto& p : profiles) {
    Accum& acc = by_region[p.region];
    ++acc.n_facilities;
    for (const auto& [aspect, mean] : p.aspect_mean)
      acc.facility_means[aspect].push_back(mean);
  }
  for (const auto& r : reviews.items) {
    auto reg = region_of.find(r.facility_id);
    if (reg == region_of.end()) continue;  // facility not in the profile set
    if (!r.has_text()) continue;
    Accum& acc = by_region[reg->second];
    ++acc.n_text_reviews;
    acc.rating_sum += r.rating;
    auto sentiment = sentiments.find(r.review_id);
    if (sentiment == sentiments.end()) continue;
    for (const auto& [aspect, polarity] : sentiment->second.labels) {
      acc.score_sum[aspect] += absa::polarity_to_score(polarity);
      ++acc.score_count[aspect];
    }
  }

  std::vector<RegionAspectSummary> out;
  for (auto& [region, acc] : by_region) {
    if (acc.n_facilities == 0) continue;
    RegionAspectSummary s;
    s.region = region;
    s.n_facilities = acc.n_facilities;
    s.n_text_reviews = acc.n_text_reviews;
    s.mean_rating =
        acc.n_text_reviews > 0 ? acc.rating_sum / static_cast<double>(acc.n_text_reviews) : 0.0;
    for (const auto& [aspect, count] : acc.score_count) {
      s.review_count[aspect] = count;
      if (count > 0)
        s.review_weighted_mean[aspect] =
            acc.score_sum.at(aspect) / static_cast<double>(count);
    }
    for (auto& [aspect, means] : acc.facility_means)
      s.facility_mean_box[aspect] = box_stats(std::move(means));
    out.push_back(std::move(s));
  }
  return out;
}

json profile_to_json(const FacilityAspectProfile& p) {
  json means = json::object();
  json counts = json::object();
  for (Aspect a : absa::kAllAspects) {
    const std::string name(absa::aspect_name(a));
    counts[name] = p.count_of(a);
    if (auto it = p.aspect_mean.find(a); it != p.aspect_mean.end())
      means[name] = it->second;
  }
  return json{{"facility_id", p.facility_id},
              {"region", std::string(corpus::region_name(p.region))},
              {"mean_rating", p.mean_rating},
              {"aspect_mean", means},
              {"aspect_count", counts},
              {"n_text_reviews", p.n_text_reviews}};
}

FacilityAspectProfile profile_from_json(const json& j) {
  FacilityAspectProfile p;
  p.facility_id = j.at("facility_id").get<std::string>();
  const auto region = corpus::region_from_name(j.at("region").get<std::string>());
  if (!region) throw PipelineError("profiles", "unknown region in profile record");
  p.region = *region;
  p.mean_rating = j.at("mean_rating").get<double>();
  p.n_text_reviews = j.at("n_text_reviews").get<long>();
  for (Aspect a : absa::kAllAspects) {
    const std::string name(absa::aspect_name(a));
    p.aspect_count[a] = j.at("aspect_count").value(name, 0L);
    if (j.at("aspect_mean").contains(name))
      p.aspect_mean[a] = j.at("aspect_mean")[name].get<double>();
  }
  return p;
}

std::string profiles_to_csv(std::span<const FacilityAspectProfile> profiles) {
  std::string out = "facility_id,region,mean_rating,n_text_reviews";
  for (Aspect a : absa::kAllAspects) {
    const std::string name = to_lower(absa::aspect_name(a));
    std::string slug;
    for (char c : name) slug += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    out += ",mean_" + slug + ",count_" + slug;
  }
  out += "\n";
  for (const auto& p : profiles) {
    out += csv_escape(p.facility_id);
    out += ",";
    out += corpus::region_name(p.region);
    out += "," + format_double(p.mean_rating);
    out += "," + std::to_string(p.n_text_reviews);
    for (Aspect a : absa::kAllAspects) {
      auto it = p.aspect_mean.find(a);
      out += ",";
      if (it != p.aspect_mean.end()) out += format_double(it->second);
      out += "," + std::to_string(p.count_of(a));
    }
    out += "\n";
  }
  return out;
}

json region_summaries_to_json(std::span<const RegionAspectSummary> summaries) {
  json arr = json::array();
  for (const auto& s : summaries) {
    json aspects = json::object();
    for (Aspect a : absa::kAllAspects) {
      const std::string name(absa::aspect_name(a));
      json entry = json::object();
      if (auto it = s.review_weighted_mean.find(a); it != s.review_weighted_mean.end())
        entry["review_weighted_mean"] = it->second;
      if (auto it = s.review_count.find(a); it != s.review_count.end())
        entry["review_count"] = it->second;
      if (auto it = s.facility_mean_box.find(a); it != s.facility_mean_box.end()) {
        const BoxStats& b = it->second;
        entry["box"] = {{"median", b.median},     {"q1", b.q1},
                        {"q3", b.q3},             {"lo_fence", b.lo_fence},
                        {"hi_fence", b.hi_fence}, {"n", b.n}};
      }
      if (!entry.empty()) aspects[name] = entry;
    }
    arr.push_back({{"region", std::string(corpus::region_name(s.region))},
                   {"n_facilities", s.n_facilities},
                   {"n_text_reviews", s.n_text_reviews},
                   {"mean_rating", s.mean_rating},
                   {"aspects", aspects}});
  }
  return json{{"regions", arr}};
}

}  // namespace carescope::agg
