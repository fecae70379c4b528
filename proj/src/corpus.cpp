#include "carescope/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "carescope/util.hpp"

namespace carescope::corpus {

namespace {

using nlohmann::json;

const std::unordered_set<std::string> kDmvStates = {"DC", "MD", "VA"};

// State abbreviation followed by a ZIP, e.g. ", FL 33601" or "VA 22203-1000".
const std::regex kStateZip(R"(\b([A-Z]{2})[ ,]+(\d{5})(-\d{4})?\b)");

bool parse_rating(const json& v, int* out) {
  if (v.is_number_integer()) {
    *out = v.get<int>();
  } else if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d != std::floor(d)) return false;
    *out = static_cast<int>(d);
  } else {
    return false;
  }
  return *out >= 1 && *out <= 5;
}

std::optional<Review> review_from_json(const json& rec) {
  if (!rec.is_object()) return std::nullopt;
  Review r;
  if (!rec.contains("gmap_id") || !rec["gmap_id"].is_string()) return std::nullopt;
  r.facility_id = rec["gmap_id"].get<std::string>();
  if (r.facility_id.empty()) return std::nullopt;
  if (!rec.contains("rating") || !parse_rating(rec["rating"], &r.rating))
    return std::nullopt;
  if (rec.contains("text") && rec["text"].is_string())
    r.text = rec["text"].get<std::string>();
  if (rec.contains("time") && rec["time"].is_number())
    r.timestamp_ms = rec["time"].get<std::int64_t>();
  if (rec.contains("user_id") && rec["user_id"].is_string())
    r.user_id = rec["user_id"].get<std::string>();
  if (rec.contains("review_id") && rec["review_id"].is_string() &&
      !rec["review_id"].get<std::string>().empty()) {
    r.review_id = rec["review_id"].get<std::string>();
  } else {
    const std::string key =
        r.user_id + "|" + r.facility_id + "|" + std::to_string(r.timestamp_ms);
    r.review_id = sha256_hex(key).substr(0, 16);
  }
  return r;
}

std::optional<Facility> facility_from_json(const json& rec) {
  if (!rec.is_object()) return std::nullopt;
  Facility f;
  if (!rec.contains("gmap_id") || !rec["gmap_id"].is_string()) return std::nullopt;
  f.facility_id = rec["gmap_id"].get<std::string>();
  if (f.facility_id.empty()) return std::nullopt;
  if (rec.contains("name") && rec["name"].is_string())
    f.name = rec["name"].get<std::string>();
  if (rec.contains("address") && rec["address"].is_string())
    f.address = rec["address"].get<std::string>();
  if (!rec.contains("latitude") || !rec["latitude"].is_number()) return std::nullopt;
  if (!rec.contains("longitude") || !rec["longitude"].is_number()) return std::nullopt;
  f.latitude = rec["latitude"].get<double>();
  f.longitude = rec["longitude"].get<double>();
  if (f.latitude < -90.0 || f.latitude > 90.0) return std::nullopt;
  if (f.longitude < -180.0 || f.longitude > 180.0) return std::nullopt;
  if (rec.contains("category") && rec["category"].is_array())
    for (const auto& tag : rec["category"])
      if (tag.is_string()) f.category_tags.push_back(tag.get<std::string>());
  if (rec.contains("avg_rating") && rec["avg_rating"].is_number())
    f.meta_avg_rating = rec["avg_rating"].get<double>();
  if (rec.contains("num_of_reviews") && rec["num_of_reviews"].is_number_integer())
    f.meta_num_ratings = rec["num_of_reviews"].get<long>();
  const RegionResolution res = resolve_region(f.address);
  f.region = res.region;
  f.region_resolved = res.resolved;
  return f;
}

json json_from_csv_row(const CsvTable& table, const std::vector<std::string>& row) {
  json rec = json::object();
  for (std::size_t i = 0; i < table.header.size() && i < row.size(); ++i) {
    const std::string& name = table.header[i];
    const std::string& cell = row[i];
    if (cell.empty()) continue;
    if (name == "rating" || name == "latitude" || name == "longitude" ||
        name == "avg_rating") {
      try {
        rec[name] = std::stod(cell);
      } catch (const std::exception&) {
        rec[name] = cell;  // let the validator reject it
      }
    } else if (name == "time" || name == "num_of_reviews") {
      try {
        rec[name] = static_cast<std::int64_t>(std::stoll(cell));
      } catch (const std::exception&) {
        rec[name] = cell;
      }
    } else if (name == "category") {
      rec[name] = json::array();
      for (const auto& tag : split(cell, ';'))
        if (!tag.empty()) rec[name].push_back(tag);
    } else {
      rec[name] = cell;
    }
  }
  return rec;
}

template <typename T, typename FromJson>
void load_records(const std::filesystem::path& path, InputFormat format,
                  FromJson from_json, std::vector<T>* out, long* n_malformed,
                  const char* stage) {
  const std::string content = read_file(path);
  long total = 0;
  if (format == InputFormat::kJsonLines) {
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      ++total;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded()) {
        ++*n_malformed;
        continue;
      }
      if (auto item = from_json(rec))
        out->push_back(std::move(*item));
      else
        ++*n_malformed;
    }
  } else {
    const CsvTable table = parse_csv(content);
    for (const auto& row : table.rows) {
      ++total;
      if (auto item = from_json(json_from_csv_row(table, row)))
        out->push_back(std::move(*item));
      else
        ++*n_malformed;
    }
  }
  if (total > 0 && *n_malformed * 2 > total)
    throw PipelineError(stage, "corrupt input: " + std::to_string(*n_malformed) + " of " +
                                   std::to_string(total) + " records malformed in " +
                                   path.string());
}

}  // namespace

std::string_view region_name(Region r) {
  switch (r) {
    case Region::kDmv: return "DMV";
    case Region::kFl: return "FL";
    case Region::kOther: return "OTHER";
  }
  throw std::logic_error("unreachable region");
}

std::optional<Region> region_from_name(std::string_view name) {
  if (name == "DMV") return Region::kDmv;
  if (name == "FL") return Region::kFl;
  if (name == "OTHER") return Region::kOther;
  return std::nullopt;
}

RegionResolution resolve_region(std::string_view address) {
  // Take the last state+ZIP match; street lines can contain stray
  // two-letter uppercase tokens.
  std::match_results<std::string_view::const_iterator> m;
  auto begin = address.begin();
  std::string state;
  while (std::regex_search(begin, address.end(), m, kStateZip)) {
    state = m[1].str();
    begin = m[0].second;
  }
  if (state.empty()) return {Region::kOther, false};
  if (kDmvStates.contains(state)) return {Region::kDmv, true};
  if (state == "FL") return {Region::kFl, true};
  return {Region::kOther, true};
}

const Facility* FacilitySet::find(std::string_view facility_id) const {
  for (const auto& f : items)
    if (f.facility_id == facility_id) return &f;
  return nullptr;
}

bool Review::has_text() const { return !trim(text).empty(); }

ReviewSet load_reviews(const std::filesystem::path& path, InputFormat format) {
  ReviewSet set;
  std::unordered_set<std::string> seen;
  auto from_json = [&seen](const json& rec) -> std::optional<Review> {
    auto r = review_from_json(rec);
    if (r && !seen.insert(r->review_id).second) return std::nullopt;  // duplicate id
    return r;
  };
  load_records<Review>(path, format, from_json, &set.items, &set.n_malformed,
                       "load_reviews");
  return set;
}

FacilitySet load_facilities(const std::filesystem::path& path, InputFormat format) {
  FacilitySet set;
  std::unordered_set<std::string> seen;
  auto from_json = [&seen](const json& rec) -> std::optional<Facility> {
    auto f = facility_from_json(rec);
    if (f && !seen.insert(f->facility_id).second) return std::nullopt;  // duplicate id
    return f;
  };
  load_records<Facility>(path, format, from_json, &set.items, &set.n_malformed,
                         "load_facilities");
  return set;
}

FacilitySet filter_urgent_care(const FacilitySet& facilities, std::string_view keyword) {
  if (trim(keyword).empty())
    throw PipelineError("filter_urgent_care", "keyword must be non-empty");
  FacilitySet out;
  out.n_malformed = facilities.n_malformed;
  for (const auto& f : facilities.items) {
    const bool name_hit = icontains(f.name, keyword);
    const bool tag_hit = std::any_of(f.category_tags.begin(), f.category_tags.end(),
                                     [&](const std::string& t) { return icontains(t, keyword); });
    if (name_hit || tag_hit) out.items.push_back(f);
  }
  return out;
}

FacilitySet filter_region(const FacilitySet& facilities, const std::set<Region>& regions) {
  FacilitySet out;
  out.n_malformed = facilities.n_malformed;
  for (const auto& f : facilities.items) {
    if (regions.contains(f.region)) {
      out.items.push_back(f);
    } else if (!f.region_resolved) {
      ++out.n_unresolved_region_dropped;
    }
  }
  return out;
}

ReviewSet drop_textless(const ReviewSet& reviews) {
  ReviewSet out;
  out.n_malformed = reviews.n_malformed;
  for (const auto& r : reviews.items)
    if (r.has_text()) out.items.push_back(r);
  return out;
}

CorpusSummary corpus_summary(const ReviewSet& reviews, const FacilitySet& facilities) {
  CorpusSummary s;
  s.n_facilities = static_cast<long>(facilities.items.size());
  std::unordered_map<std::string, Region> region_of;
  region_of.reserve(facilities.items.size());
  for (const auto& f : facilities.items) {
    region_of[f.facility_id] = f.region;
    ++s.by_region[f.region].n_facilities;
  }
  for (const auto& r : reviews.items) {
    ++s.n_reviews_total;
    if (r.has_text()) ++s.n_reviews_with_text;
    auto it = region_of.find(r.facility_id);
    if (it == region_of.end()) {
      ++s.n_orphan_reviews;
      continue;
    }
    RegionCounts& rc = s.by_region[it->second];
    ++rc.n_reviews_total;
    if (r.has_text()) ++rc.n_reviews_with_text;
  }
  return s;
}

nlohmann::json CorpusSummary::to_json() const {
  json by = json::object();
  for (const auto& [region, counts] : by_region) {
    by[std::string(region_name(region))] = {
        {"n_facilities", counts.n_facilities},
        {"n_reviews_total", counts.n_reviews_total},
        {"n_reviews_with_text", counts.n_reviews_with_text}};
  }
  return json{{"n_facilities", n_facilities},
              {"n_reviews_total", n_reviews_total},
              {"n_reviews_with_text", n_reviews_with_text},
              {"n_orphan_reviews", n_orphan_reviews},
              {"by_region", by}};
}

std::string review_to_jsonl(const Review& r) {
  json rec{{"review_id", r.review_id}, {"gmap_id", r.facility_id},
           {"rating", r.rating},       {"text", r.text},
           {"time", r.timestamp_ms},   {"user_id", r.user_id}};
  return rec.dump();
}

std::string facility_to_jsonl(const Facility& f) {
  json rec{{"gmap_id", f.facility_id}, {"name", f.name},
           {"address", f.address},     {"latitude", f.latitude},
           {"longitude", f.longitude}, {"category", f.category_tags},
           {"region", std::string(region_name(f.region))}};
  if (f.meta_avg_rating) rec["avg_rating"] = *f.meta_avg_rating;
  if (f.meta_num_ratings) rec["num_of_reviews"] = *f.meta_num_ratings;
  return rec.dump();
}

}  // namespace carescope::corpus
