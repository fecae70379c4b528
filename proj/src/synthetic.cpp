#include "carescope/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include "carescope/lexicon.hpp"
#include "carescope/util.hpp"

namespace carescope::synth {

namespace {

using absa::Aspect;
using absa::Polarity;
using nlohmann::json;

// Every sentence contains exactly one cue token from the lexicon, and no cue
// token of any other aspect; the lexicon therefore reproduces the planted
// label for each mentioned aspect.
struct SentenceBank {
  Aspect aspect;
  Polarity polarity;
  std::vector<std::string_view> sentences;
};

const std::vector<SentenceBank>& sentence_banks() {
  using enum Aspect;
  using enum Polarity;
  static const std::vector<SentenceBank> banks = {
      {kInterpersonal, kPositive,
       {"Staff came across as friendly during our visit.",
        "Everyone was kind to us from check-in to discharge.",
        "The nurse was caring and took time with questions."}},
      {kInterpersonal, kNegative,
       {"The receptionist was rude about our paperwork.",
        "The physician felt dismissive of our concerns.",
        "One aide was disrespectful to my mother."}},
      {kInterpersonal, kNeutral, {"Their demeanor was hard to read either way."}},
      {kTechnicalQuality, kPositive,
       {"The exam was thorough from start to finish.",
        "Our provider seemed deeply knowledgeable.",
        "Results were accurate on the first pass."}},
      {kTechnicalQuality, kNegative,
       {"They misdiagnosed the issue at first.",
        "The workup felt sloppy and rushed.",
        "A careless mix-up led to the wrong treatment plan."}},
      {kTechnicalQuality, kNeutral, {"We left with a diagnosis to follow up on."}},
      {kOperationalEfficiency, kPositive,
       {"Check-in was quick and painless.",
        "We were seen fast despite a full lobby.",
        "The whole visit ran efficient end to end."}},
      {kOperationalEfficiency, kNegative,
       {"The wait dragged past an hour.",
        "Service was slow even with few patients around.",
        "The intake process felt disorganized."}},
      {kOperationalEfficiency, kNeutral, {"Online scheduling handled the booking."}},
      {kFinances, kPositive,
       {"The visit was affordable without insurance.",
        "Charges seemed reasonable for the care given.",
        "Pricing was transparent up front."}},
      {kFinances, kNegative,
       {"We were overcharged for a basic visit.",
        "The bill was expensive for what we got.",
        "Their billing added fees nobody explained."}},
      {kFinances, kNeutral, {"The copay matched what our plan lists."}},
      {kFacilities, kPositive,
       {"The clinic was clean and bright.",
        "Exam rooms looked modern and well kept.",
        "The seating area was comfortable."}},
      {kFacilities, kNegative,
       {"The restroom was dirty when we arrived.",
        "Equipment looked outdated and worn.",
        "The lobby felt cramped at midday."}},
      {kFacilities, kNeutral, {"Street parking was the only option nearby."}},
  };
  return banks;
}

std::string_view pick_sentence(Aspect aspect, Polarity polarity, std::mt19937_64& rng) {
  for (const auto& bank : sentence_banks()) {
    if (bank.aspect == aspect && bank.polarity == polarity) {
      std::uniform_int_distribution<std::size_t> pick(0, bank.sentences.size() - 1);
      return bank.sentences[pick(rng)];
    }
  }
  throw std::logic_error("no sentence bank for aspect/polarity");
}

constexpr std::array<std::string_view, 3> kFillers = {
    "We came in on a weekday afternoon.",
    "This was our second visit this year.",
    "The office sits just off the main road.",
};

struct RegionSpec {
  corpus::Region region;
  const char* state;
  const char* city;
  const char* zip;
  const char* cbg_prefix;  // state + county FIPS
  double base_lon;
  double base_lat;
};

constexpr std::array<RegionSpec, 2> kRegionSpecs = {{
    {corpus::Region::kFl, "FL", "Tampa", "33601", "12057", -82.8, 27.0},
    {corpus::Region::kDmv, "MD", "Bethesda", "20814", "24031", -77.6, 38.8},
}};

constexpr double kCellSize = 0.02;
constexpr int kCellsPerRow = 100;

struct FacilityPlan {
  corpus::Facility facility;
  FacilityTruth truth;
  int n_reviews = 0;
  bool finances = true;
};

}  // namespace

SyntheticCorpus synthesize(const GenParams& params) {
  if (params.n_facilities < 1) throw UsageError("synthesize: n_facilities must be >= 1");
  if (params.reviews_min < 1 || params.reviews_max < params.reviews_min)
    throw UsageError("synthesize: bad reviews_min/reviews_max");
  if (params.finances_facility_rate < 0 || params.finances_facility_rate > 1)
    throw UsageError("synthesize: finances_facility_rate must be in [0,1]");

  SyntheticCorpus out;
  out.params = params;
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Facilities, block groups, latent tendencies.
  std::vector<FacilityPlan> plans;
  plans.reserve(params.n_facilities);
  char buf[64];
  for (int i = 0; i < params.n_facilities; ++i) {
    const RegionSpec& spec = kRegionSpecs[i % 2];
    const int cell = i / 2;
    const int row = cell / kCellsPerRow;
    const int col = cell % kCellsPerRow;
    const double lon0 = spec.base_lon + col * kCellSize;
    const double lat0 = spec.base_lat + row * kCellSize;

    FacilityPlan plan;
    corpus::Facility& f = plan.facility;
    std::snprintf(buf, sizeof buf, "fac%04d", i);
    f.facility_id = buf;
    std::snprintf(buf, sizeof buf, "Urgent Care Center #%d", i);
    f.name = buf;
    std::snprintf(buf, sizeof buf, "%d Main St, %s, %s %s", 100 + i, spec.city,
                  spec.state, spec.zip);
    f.address = buf;
    std::uniform_real_distribution<double> jitter(-0.007, 0.007);
    f.longitude = lon0 + kCellSize / 2 + jitter(rng);
    f.latitude = lat0 + kCellSize / 2 + jitter(rng);
    f.category_tags = {"Urgent care center", "Medical clinic"};
    f.region = spec.region;
    f.region_resolved = true;

    FacilityTruth& t = plan.truth;
    t.facility_id = f.facility_id;
    t.region = spec.region;
    std::snprintf(buf, sizeof buf, "%s%06d%d", spec.cbg_prefix, i, 1);
    t.cbg_id = buf;

    census::CbgProfile cbg;
    cbg.cbg_id = t.cbg_id;
    cbg.population_density = 200.0 + 7800.0 * unit(rng);
    cbg.median_income = 30000.0 + 120000.0 * unit(rng);
    cbg.rent_to_income_ratio = 0.15 + 0.30 * unit(rng);
    cbg.gini_index = 0.30 + 0.25 * unit(rng);
    cbg.household_below_poverty_rate = 0.03 + 0.32 * unit(rng);
    cbg.no_insurance_rate = 0.02 + 0.23 * unit(rng);
    cbg.unemployment_rate = 0.02 + 0.13 * unit(rng);
    t.density = cbg.population_density;
    out.cbg_profiles.push_back(cbg);

    census::CbgGeometry geom;
    geom.cbg_id = t.cbg_id;
    census::Ring ring;
    ring.points = {{lon0, lat0},
                   {lon0 + kCellSize, lat0},
                   {lon0 + kCellSize, lat0 + kCellSize},
                   {lon0, lat0 + kCellSize},
                   {lon0, lat0}};
    geom.polygons.push_back({ring});
    out.cbg_geometries.push_back(std::move(geom));

    for (Aspect a : absa::kAllAspects)
      t.theta[a] = -0.8 + 1.6 * unit(rng);
    plan.finances = unit(rng) < params.finances_facility_rate;
    t.finances_mentioned = plan.finances;
    std::uniform_int_distribution<int> n_reviews(params.reviews_min, params.reviews_max);
    plan.n_reviews = n_reviews(rng);
    t.n_reviews = plan.n_reviews;
    plans.push_back(std::move(plan));
  }

  // Review texts and truth labels.
  struct ReviewPlan {
    corpus::Review review;
    int facility_index;
  };
  std::vector<ReviewPlan> review_plans;
  std::int64_t timestamp = 1600000000000;
  for (int i = 0; i < params.n_facilities; ++i) {
    FacilityPlan& plan = plans[i];
    for (int r = 0; r < plan.n_reviews; ++r) {
      ReviewPlan rp;
      rp.facility_index = i;
      corpus::Review& review = rp.review;
      std::snprintf(buf, sizeof buf, "r%04d_%03d", i, r);
      review.review_id = buf;
      review.facility_id = plan.facility.facility_id;
      std::snprintf(buf, sizeof buf, "u%05d", (i * 131 + r * 17) % 90000);
      review.user_id = buf;
      review.timestamp_ms = timestamp;
      timestamp += 3600000;

      absa::AspectSentimentSet truth;
      truth.review_id = review.review_id;
      std::string text(kFillers[(i + r) % kFillers.size()]);
      for (Aspect a : absa::kAllAspects) {
        if (a == Aspect::kFinances && !plan.finances) continue;
        const double theta = plan.truth.theta[a];
        const double p_pos = 0.4 * (1.0 + theta);
        const double p_neg = 0.4 * (1.0 - theta);
        const double u = unit(rng);
        Polarity polarity = Polarity::kNeutral;
        if (u < p_pos)
          polarity = Polarity::kPositive;
        else if (u < p_pos + p_neg)
          polarity = Polarity::kNegative;
        truth.labels[a] = polarity;
        text += " ";
        text += pick_sentence(a, polarity, rng);
      }
      review.text = text;
      out.truth_labels.emplace(review.review_id, std::move(truth));
      review_plans.push_back(std::move(rp));
    }
    // Occasional rating-only review, dropped by the text filter at ingest.
    if (unit(rng) < params.textless_rate) {
      ReviewPlan rp;
      rp.facility_index = i;
      std::snprintf(buf, sizeof buf, "r%04d_blank", i);
      rp.review.review_id = buf;
      rp.review.facility_id = plan.facility.facility_id;
      rp.review.text = "";
      rp.review.timestamp_ms = timestamp;
      timestamp += 3600000;
      std::uniform_int_distribution<int> stars(1, 5);
      rp.review.rating = stars(rng);
      review_plans.push_back(std::move(rp));
    }
  }

  // Realized aspect means and the planted rating model.
  std::vector<double> density;
  density.reserve(plans.size());
  for (const auto& plan : plans) density.push_back(plan.truth.density);
  const std::vector<double> z_density =
      plans.size() >= 2 ? census::zscore(density, "population_density")
                        : std::vector<double>(plans.size(), 0.0);

  std::vector<std::map<Aspect, double>> score_sum(plans.size());
  std::vector<std::map<Aspect, long>> score_count(plans.size());
  for (const auto& rp : review_plans) {
    auto truth = out.truth_labels.find(rp.review.review_id);
    if (truth == out.truth_labels.end()) continue;  // textless
    for (const auto& [aspect, polarity] : truth->second.labels) {
      score_sum[rp.facility_index][aspect] += absa::polarity_to_score(polarity);
      ++score_count[rp.facility_index][aspect];
    }
  }
  std::normal_distribution<double> noise(0.0, params.noise_sd);
  for (std::size_t i = 0; i < plans.size(); ++i) {
    FacilityTruth& t = plans[i].truth;
    t.z_density = z_density[i];
    for (const auto& [aspect, count] : score_count[i])
      if (count > 0) t.realized_mean[aspect] = score_sum[i][aspect] / count;
    double target = params.beta0;
    if (auto it = t.realized_mean.find(Aspect::kInterpersonal);
        it != t.realized_mean.end())
      target += params.beta_interpersonal * it->second;
    if (auto it = t.realized_mean.find(Aspect::kOperationalEfficiency);
        it != t.realized_mean.end())
      target += params.beta_opeff * it->second;
    target += params.gamma_density * t.z_density;
    t.noise = noise(rng);
    target += t.noise;
    t.rating_target = std::clamp(target, 1.0, 5.0);
  }

  // Integer stars whose mean tracks the target.
  for (auto& rp : review_plans) {
    if (!out.truth_labels.contains(rp.review.review_id)) continue;  // already rated
    const double target = plans[rp.facility_index].truth.rating_target;
    const int base = static_cast<int>(std::floor(target));
    const double frac = target - base;
    const int stars = base + (unit(rng) < frac ? 1 : 0);
    rp.review.rating = std::clamp(stars, 1, 5);
  }

  // Decoy facilities exercise the keyword filter; their reviews surface as
  // orphans in the corpus summary after ingest drops the facilities.
  for (int d = 0; d < params.n_decoys; ++d) {
    const RegionSpec& spec = kRegionSpecs[d % 2];
    corpus::Facility f;
    std::snprintf(buf, sizeof buf, "decoy%03d", d);
    f.facility_id = buf;
    std::snprintf(buf, sizeof buf, "Corner Deli #%d", d);
    f.name = buf;
    std::snprintf(buf, sizeof buf, "%d Side St, %s, %s %s", 10 + d, spec.city,
                  spec.state, spec.zip);
    f.address = buf;
    f.longitude = spec.base_lon - 1.0 - 0.01 * d;
    f.latitude = spec.base_lat - 1.0;
    f.category_tags = {"Deli"};
    f.region = spec.region;
    f.region_resolved = true;
    out.facilities.items.push_back(std::move(f));

    corpus::Review review;
    std::snprintf(buf, sizeof buf, "decoyrev%03d", d);
    review.review_id = buf;
    std::snprintf(buf, sizeof buf, "decoy%03d", d);
    review.facility_id = buf;
    review.text = "The lunch special was fine.";
    std::uniform_int_distribution<int> stars(1, 5);
    review.rating = stars(rng);
    review.timestamp_ms = timestamp;
    timestamp += 3600000;
    out.reviews.items.push_back(std::move(review));
  }

  for (auto& plan : plans) {
    out.facilities.items.push_back(plan.facility);
    out.facility_truth.push_back(plan.truth);
  }
  for (auto& rp : review_plans) out.reviews.items.push_back(std::move(rp.review));
  std::sort(out.reviews.items.begin(), out.reviews.items.end(),
            [](const corpus::Review& a, const corpus::Review& b) {
              return a.review_id < b.review_id;
            });
  std::sort(out.facilities.items.begin(), out.facilities.items.end(),
            [](const corpus::Facility& a, const corpus::Facility& b) {
              return a.facility_id < b.facility_id;
            });

  // Annotations: the first n_annotated text reviews by id. Annotators 1-3
  // copy the truth; annotator 4 is noisy, so majority voting still recovers
  // the planted labels.
  int annotated = 0;
  for (const auto& review : out.reviews.items) {
    if (annotated >= params.n_annotated) break;
    auto truth = out.truth_labels.find(review.review_id);
    if (truth == out.truth_labels.end()) continue;
    for (int annotator = 1; annotator <= 3; ++annotator) {
      eval::AnnotationRecord rec;
      rec.review_id = review.review_id;
      rec.annotator_id = annotator;
      rec.labels = truth->second.labels;
      out.annotations.push_back(std::move(rec));
    }
    eval::AnnotationRecord noisy;
    noisy.review_id = review.review_id;
    noisy.annotator_id = 4;
    for (const auto& [aspect, polarity] : truth->second.labels) {
      const double u = unit(rng);
      if (u < 0.05) continue;  // dropped aspect
      if (u < 0.13) {
        noisy.labels[aspect] = polarity == Polarity::kPositive ? Polarity::kNegative
                                                               : Polarity::kPositive;
      } else {
        noisy.labels[aspect] = polarity;
      }
    }
    out.annotations.push_back(std::move(noisy));
    ++annotated;
  }
  return out;
}

nlohmann::json SyntheticCorpus::ground_truth_json() const {
  json facilities_json = json::array();
  for (const auto& t : facility_truth) {
    json theta = json::object();
    json realized = json::object();
    for (Aspect a : absa::kAllAspects) {
      const std::string name(absa::aspect_name(a));
      if (auto it = t.theta.find(a); it != t.theta.end()) theta[name] = it->second;
      if (auto it = t.realized_mean.find(a); it != t.realized_mean.end())
        realized[name] = it->second;
    }
    facilities_json.push_back({{"facility_id", t.facility_id},
                               {"cbg_id", t.cbg_id},
                               {"region", std::string(corpus::region_name(t.region))},
                               {"density", t.density},
                               {"z_density", t.z_density},
                               {"theta", theta},
                               {"realized_mean", realized},
                               {"noise", t.noise},
                               {"rating_target", t.rating_target},
                               {"n_reviews", t.n_reviews},
                               {"finances_mentioned", t.finances_mentioned}});
  }
  return json{{"params",
               {{"seed", params.seed},
                {"n_facilities", params.n_facilities},
                {"reviews_min", params.reviews_min},
                {"reviews_max", params.reviews_max},
                {"beta0", params.beta0},
                {"beta_interpersonal", params.beta_interpersonal},
                {"beta_opeff", params.beta_opeff},
                {"gamma_density", params.gamma_density},
                {"noise_sd", params.noise_sd},
                {"finances_facility_rate", params.finances_facility_rate},
                {"n_annotated", params.n_annotated}}},
              {"facilities", facilities_json}};
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::string reviews_out;
  for (const auto& r : corpus.reviews.items) {
    json rec{{"review_id", r.review_id}, {"gmap_id", r.facility_id},
             {"rating", r.rating},       {"time", r.timestamp_ms},
             {"user_id", r.user_id}};
    rec["text"] = r.has_text() ? json(r.text) : json();
    reviews_out += rec.dump();
    reviews_out += "\n";
  }
  write_file_atomic(out_dir / "reviews.jsonl", reviews_out);

  std::string facilities_out;
  for (const auto& f : corpus.facilities.items) {
    json rec{{"gmap_id", f.facility_id}, {"name", f.name},
             {"address", f.address},     {"latitude", f.latitude},
             {"longitude", f.longitude}, {"category", f.category_tags}};
    facilities_out += rec.dump();
    facilities_out += "\n";
  }
  write_file_atomic(out_dir / "facilities.jsonl", facilities_out);

  std::string cbg_csv =
      "cbg_id,population_density,median_income,rent_to_income_ratio,gini_index,"
      "household_below_poverty_rate,no_insurance_rate,unemployment_rate\n";
  for (const auto& c : corpus.cbg_profiles) {
    cbg_csv += c.cbg_id;
    for (double v : c.covariates()) cbg_csv += "," + format_double(v);
    cbg_csv += "\n";
  }
  write_file_atomic(out_dir / "cbg_profiles.csv", cbg_csv);

  json features = json::array();
  for (const auto& g : corpus.cbg_geometries) {
    json rings = json::array();
    for (const auto& polygon : g.polygons) {
      json poly = json::array();
      for (const auto& ring : polygon) {
        json pts = json::array();
        for (const auto& pt : ring.points) pts.push_back({pt[0], pt[1]});
        poly.push_back(pts);
      }
      rings.push_back(poly);
    }
    // Single-polygon features; emitted as Polygon geometry.
    features.push_back({{"type", "Feature"},
                        {"properties", {{"GEOID", g.cbg_id}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", rings[0]}}}});
  }
  const json collection{{"type", "FeatureCollection"}, {"features", features}};
  write_file_atomic(out_dir / "cbg_geometries.geojson", collection.dump());

  std::string annotations_csv = "review_id,annotator_id,aspect,polarity\n";
  for (const auto& rec : corpus.annotations) {
    for (const auto& [aspect, polarity] : rec.labels) {
      annotations_csv += rec.review_id + "," + std::to_string(rec.annotator_id) + "," +
                         csv_escape(absa::aspect_name(aspect)) + "," +
                         std::string(absa::polarity_name(polarity)) + "\n";
    }
  }
  write_file_atomic(out_dir / "annotations.csv", annotations_csv);

  std::string truth_out;
  for (const auto& [review_id, labels] : corpus.truth_labels) {
    json rec{{"review_id", review_id}, {"labels", json::object()},
             {"none_flag", labels.none_flag}};
    for (const auto& [aspect, polarity] : labels.labels)
      rec["labels"][std::string(absa::aspect_name(aspect))] =
          std::string(absa::polarity_name(polarity));
    truth_out += rec.dump();
    truth_out += "\n";
  }
  write_file_atomic(out_dir / "truth_labels.jsonl", truth_out);

  write_file_atomic(out_dir / "ground_truth.json", corpus.ground_truth_json().dump(2));
}

}  // namespace carescope::synth
