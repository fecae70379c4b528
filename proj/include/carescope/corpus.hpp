#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace carescope::corpus {

enum class Region { kDmv, kFl, kOther };

std::string_view region_name(Region r);
std::optional<Region> region_from_name(std::string_view name);

// Maps a US street address to a region by its state abbreviation + ZIP.
// DMV = {DC, MD, VA}, FL = {FL}; anything else (or no match) is kOther.
struct RegionResolution {
  Region region = Region::kOther;
  bool resolved = false;  // false when no state/ZIP pattern matched at all
};
RegionResolution resolve_region(std::string_view address);

struct Facility {
  std::string facility_id;
  std::string name;
  std::string address;
  double latitude = 0.0;
  double longitude = 0.0;
  std::vector<std::string> category_tags;
  std::optional<double> meta_avg_rating;    // platform average, kept for cross-checks
  std::optional<long> meta_num_ratings;
  Region region = Region::kOther;
  bool region_resolved = false;
};

struct FacilitySet {
  std::vector<Facility> items;
  long n_malformed = 0;
  // Facilities excluded by filter_region because their address never resolved.
  long n_unresolved_region_dropped = 0;

  const Facility* find(std::string_view facility_id) const;
};

struct Review {
  std::string review_id;
  std::string facility_id;
  int rating = 0;  // 1..5 stars
  std::string text;
  std::int64_t timestamp_ms = 0;
  std::string user_id;

  bool has_text() const;  // non-empty after whitespace trimming
};

struct ReviewSet {
  std::vector<Review> items;
  long n_malformed = 0;
};

enum class InputFormat { kJsonLines, kCsv };

// Throws PipelineError on unreadable files or when more than half of the
// records are malformed; individually bad records are counted and skipped.
ReviewSet load_reviews(const std::filesystem::path& path, InputFormat format);
FacilitySet load_facilities(const std::filesystem::path& path, InputFormat format);

// Retains facilities whose name or category tags contain the keyword,
// case-insensitively.
FacilitySet filter_urgent_care(const FacilitySet& facilities, std::string_view keyword);

FacilitySet filter_region(const FacilitySet& facilities, const std::set<Region>& regions);

// Retains reviews whose text is non-empty after trimming.
ReviewSet drop_textless(const ReviewSet& reviews);

struct RegionCounts {
  long n_facilities = 0;
  long n_reviews_total = 0;
  long n_reviews_with_text = 0;
};

struct CorpusSummary {
  long n_facilities = 0;
  long n_reviews_total = 0;
  long n_reviews_with_text = 0;
  long n_orphan_reviews = 0;  // reviews whose facility_id does not resolve
  std::map<Region, RegionCounts> by_region;

  nlohmann::json to_json() const;
};

CorpusSummary corpus_summary(const ReviewSet& reviews, const FacilitySet& facilities);

// JSON-lines writers for the persisted filtered corpus.
std::string review_to_jsonl(const Review& r);
std::string facility_to_jsonl(const Facility& f);

}  // namespace carescope::corpus
