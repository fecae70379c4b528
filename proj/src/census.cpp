#include "carescope/census.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <unordered_map>

#include "carescope/stats.hpp"
#include "carescope/util.hpp"

namespace carescope::census {

using nlohmann::json;

std::array<double, 7> CbgProfile::covariates() const {
  return {population_density,
          median_income,
          rent_to_income_ratio,
          gini_index,
          household_below_poverty_rate,
          no_insurance_rate,
          unemployment_rate};
}

bool CbgProfile::valid() const {
  if (cbg_id.size() != 12 ||
      !std::all_of(cbg_id.begin(), cbg_id.end(),
                   [](unsigned char c) { return std::isdigit(c) != 0; }))
    return false;
  const auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!(population_density >= 0.0)) return false;
  if (!(median_income >= 0.0)) return false;
  if (!in01(rent_to_income_ratio)) return false;
  if (!in01(gini_index)) return false;
  if (!in01(household_below_poverty_rate)) return false;
  if (!in01(no_insurance_rate)) return false;
  if (!in01(unemployment_rate)) return false;
  for (double v : covariates())
    if (!std::isfinite(v)) return false;
  return true;
}

CbgLoadResult load_cbg_profiles(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  static constexpr std::array<const char*, 8> kColumns = {
      "cbg_id",
      "population_density",
      "median_income",
      "rent_to_income_ratio",
      "gini_index",
      "household_below_poverty_rate",
      "no_insurance_rate",
      "unemployment_rate"};
  std::array<std::size_t, 8> idx{};
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    const auto col = table.column(kColumns[i]);
    if (!col)
      throw PipelineError("census", std::string("missing column ") + kColumns[i] +
                                        " in " + path.string());
    idx[i] = *col;
  }

  CbgLoadResult out;
  for (const auto& row : table.rows) {
    if (row.size() < table.header.size()) {
      ++out.n_rejected;
      continue;
    }
    CbgProfile p;
    p.cbg_id = row[idx[0]];
    try {
      p.population_density = std::stod(row[idx[1]]);
      p.median_income = std::stod(row[idx[2]]);
      p.rent_to_income_ratio = std::stod(row[idx[3]]);
      p.gini_index = std::stod(row[idx[4]]);
      p.household_below_poverty_rate = std::stod(row[idx[5]]);
      p.no_insurance_rate = std::stod(row[idx[6]]);
      p.unemployment_rate = std::stod(row[idx[7]]);
    } catch (const std::exception&) {
      ++out.n_rejected;
      continue;
    }
    if (!p.valid()) {
      ++out.n_rejected;
      continue;
    }
    out.profiles.push_back(std::move(p));
  }
  return out;
}

namespace {

Ring ring_from_json(const json& coords) {
  Ring ring;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2) throw PipelineError("census", "bad ring point");
    ring.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  if (ring.points.size() < 3)
    throw PipelineError("census", "ring with fewer than 3 vertices");
  if (ring.points.front() != ring.points.back())
    ring.points.push_back(ring.points.front());  // normalize to closed form
  std::vector<Point> distinct(ring.points.begin(), ring.points.end() - 1);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw PipelineError("census", "ring with fewer than 3 vertices");
  return ring;
}

std::vector<Ring> polygon_from_json(const json& coords) {
  std::vector<Ring> rings;
  for (const auto& ring : coords) rings.push_back(ring_from_json(ring));
  if (rings.empty()) throw PipelineError("census", "polygon without rings");
  return rings;
}

bool point_on_segment(Point p, Point a, Point b) {
  const double cross =
      (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
  if (cross != 0.0) return false;
  const double dot =
      (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
  if (dot < 0.0) return false;
  const double len2 = (b[0] - a[0]) * (b[0] - a[0]) + (b[1] - a[1]) * (b[1] - a[1]);
  return dot <= len2;
}

// Even-odd crossing count over one ring; boundary handled by the caller.
bool ring_crossings_odd(const Ring& ring, Point p) {
  bool inside = false;
  const auto& pts = ring.points;
  for (std::size_t i = 0, j = pts.size() - 2; i + 1 < pts.size(); j = i++) {
    const Point& a = pts[i];
    const Point& b = pts[j];
    if ((a[1] > p[1]) != (b[1] > p[1])) {
      const double x_at_y = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0];
      if (p[0] < x_at_y) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

std::vector<CbgGeometry> load_cbg_geojson(const std::filesystem::path& path) {
  const json doc = json::parse(read_file(path));
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw PipelineError("census", "expected a GeoJSON FeatureCollection in " +
                                      path.string());
  std::vector<CbgGeometry> out;
  for (const auto& feature : doc["features"]) {
    CbgGeometry g;
    if (!feature.contains("properties") || !feature["properties"].contains("GEOID"))
      throw PipelineError("census", "feature without GEOID property");
    const auto& geoid = feature["properties"]["GEOID"];
    g.cbg_id = geoid.is_string() ? geoid.get<std::string>() : geoid.dump();
    if (!feature.contains("geometry") || feature["geometry"].is_null()) continue;
    const auto& geom = feature["geometry"];
    const std::string type = geom.value("type", "");
    if (type == "Polygon") {
      g.polygons.push_back(polygon_from_json(geom["coordinates"]));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : geom["coordinates"])
        g.polygons.push_back(polygon_from_json(poly));
    } else {
      throw PipelineError("census", "unsupported geometry type " + type);
    }
    out.push_back(std::move(g));
  }
  return out;
}

bool geometry_contains(const CbgGeometry& geometry, Point p) {
  for (const auto& polygon : geometry.polygons) {
    // Boundary points count as contained, holes included.
    for (const auto& ring : polygon)
      for (std::size_t i = 0; i + 1 < ring.points.size(); ++i)
        if (point_on_segment(p, ring.points[i], ring.points[i + 1])) return true;
    bool inside = false;
    for (const auto& ring : polygon)
      if (ring_crossings_odd(ring, p)) inside = !inside;
    if (inside) return true;
  }
  return false;
}

std::optional<std::string> assign_cbg(Point p, std::span<const CbgGeometry> geometries) {
  std::optional<std::string> best;
  for (const auto& g : geometries) {
    if (!geometry_contains(g, p)) continue;
    if (!best || g.cbg_id < *best) best = g.cbg_id;
  }
  return best;
}

std::vector<double> zscore(std::span<const double> values, std::string_view label) {
  if (values.size() < 2)
    throw stats::InsufficientDataError("zscore: need at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  if (sd == 0.0) throw stats::ZeroVarianceError(std::string(label));
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

namespace {

JoinResult join_with_lookup(
    std::span<const agg::FacilityAspectProfile> profiles,
    const std::function<std::optional<std::string>(const std::string&)>& cbg_of,
    std::span<const CbgProfile> cbg_profiles) {
  std::unordered_map<std::string, const CbgProfile*> cbg_index;
  for (const auto& c : cbg_profiles) cbg_index[c.cbg_id] = &c;

  JoinResult out;
  for (const auto& p : profiles) {
    const auto cbg_id = cbg_of(p.facility_id);
    if (!cbg_id) {
      ++out.n_unassigned;
      continue;
    }
    auto it = cbg_index.find(*cbg_id);
    if (it == cbg_index.end()) {
      ++out.n_missing_cbg;
      continue;
    }
    out.enriched.push_back({p, *it->second});
  }
  std::sort(out.enriched.begin(), out.enriched.end(),
            [](const EnrichedProfile& a, const EnrichedProfile& b) {
              return a.profile.facility_id < b.profile.facility_id;
            });
  return out;
}

}  // namespace

JoinResult join_covariates(std::span<const agg::FacilityAspectProfile> profiles,
                           const corpus::FacilitySet& facilities,
                           std::span<const CbgProfile> cbg_profiles,
                           std::span<const CbgGeometry> geometries) {
  std::unordered_map<std::string, Point> location;
  for (const auto& f : facilities.items)
    location[f.facility_id] = {f.longitude, f.latitude};
  return join_with_lookup(
      profiles,
      [&](const std::string& facility_id) -> std::optional<std::string> {
        auto it = location.find(facility_id);
        if (it == location.end()) return std::nullopt;
        return assign_cbg(it->second, geometries);
      },
      cbg_profiles);
}

JoinResult join_covariates_mapped(std::span<const agg::FacilityAspectProfile> profiles,
                                  const std::map<std::string, std::string>& facility_to_cbg,
                                  std::span<const CbgProfile> cbg_profiles) {
  return join_with_lookup(
      profiles,
      [&](const std::string& facility_id) -> std::optional<std::string> {
        auto it = facility_to_cbg.find(facility_id);
        if (it == facility_to_cbg.end()) return std::nullopt;
        return it->second;
      },
      cbg_profiles);
}

std::map<std::string, std::string> load_facility_cbg_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto fid = table.column("facility_id");
  const auto cid = table.column("cbg_id");
  if (!fid || !cid)
    throw PipelineError("census", "join CSV must have columns facility_id,cbg_id");
  std::map<std::string, std::string> out;
  for (const auto& row : table.rows) {
    if (row.size() < table.header.size()) continue;
    out[row[*fid]] = row[*cid];
  }
  return out;
}

json enriched_to_json(const EnrichedProfile& e) {
  json j = agg::profile_to_json(e.profile);
  j["cbg"] = {{"cbg_id", e.cbg.cbg_id},
              {"population_density", e.cbg.population_density},
              {"median_income", e.cbg.median_income},
              {"rent_to_income_ratio", e.cbg.rent_to_income_ratio},
              {"gini_index", e.cbg.gini_index},
              {"household_below_poverty_rate", e.cbg.household_below_poverty_rate},
              {"no_insurance_rate", e.cbg.no_insurance_rate},
              {"unemployment_rate", e.cbg.unemployment_rate}};
  return j;
}

EnrichedProfile enriched_from_json(const json& j) {
  EnrichedProfile e;
  e.profile = agg::profile_from_json(j);
  const json& c = j.at("cbg");
  e.cbg.cbg_id = c.at("cbg_id").get<std::string>();
  e.cbg.population_density = c.at("population_density").get<double>();
  e.cbg.median_income = c.at("median_income").get<double>();
  e.cbg.rent_to_income_ratio = c.at("rent_to_income_ratio").get<double>();
  e.cbg.gini_index = c.at("gini_index").get<double>();
  e.cbg.household_below_poverty_rate = c.at("household_below_poverty_rate").get<double>();
  e.cbg.no_insurance_rate = c.at("no_insurance_rate").get<double>();
  e.cbg.unemployment_rate = c.at("unemployment_rate").get<double>();
  return e;
}

}  // namespace carescope::census
