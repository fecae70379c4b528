#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "absa.hpp"
#include "census.hpp"
#include "corpus.hpp"
#include "eval.hpp"

namespace carescope::synth {

// Planted model: per-facility rating target =
//   beta0 + beta_interpersonal * mean(interpersonal scores)
//         + beta_opeff * mean(operational scores)
//         + gamma_density * z(population density) + N(0, noise_sd),
// realized as integer star ratings whose per-facility mean matches the target
// in expectation.
struct GenParams {
  std::uint64_t seed = 42;
  int n_facilities = 500;
  int reviews_min = 24;
  int reviews_max = 40;
  double beta0 = 3.0;
  double beta_interpersonal = 1.7;
  double beta_opeff = 0.3;
  double gamma_density = 0.02;
  double noise_sd = 0.05;
  // Fraction of facilities whose reviews mention the Finances aspect at all.
  double finances_facility_rate = 1.0;
  int n_annotated = 400;
  int n_decoys = 25;           // non-urgent-care facilities, dropped at ingest
  double textless_rate = 0.04; // rating-only reviews, dropped at ingest
};

struct FacilityTruth {
  std::string facility_id;
  std::string cbg_id;
  corpus::Region region = corpus::Region::kOther;
  double density = 0.0;
  double z_density = 0.0;
  std::map<absa::Aspect, double> theta;          // latent tendency
  std::map<absa::Aspect, double> realized_mean;  // mean of generated scores
  double noise = 0.0;                            // the drawn epsilon term
  double rating_target = 0.0;
  long n_reviews = 0;
  bool finances_mentioned = true;
};

struct SyntheticCorpus {
  corpus::FacilitySet facilities;  // includes decoys
  corpus::ReviewSet reviews;
  std::vector<census::CbgProfile> cbg_profiles;
  std::vector<census::CbgGeometry> cbg_geometries;
  std::vector<eval::AnnotationRecord> annotations;
  // Truth labels per text review, keyed by review_id.
  std::map<std::string, absa::AspectSentimentSet> truth_labels;
  std::vector<FacilityTruth> facility_truth;
  GenParams params;

  nlohmann::json ground_truth_json() const;
};

SyntheticCorpus synthesize(const GenParams& params);

// Writes reviews.jsonl, facilities.jsonl, cbg_profiles.csv,
// cbg_geometries.geojson, annotations.csv, truth_labels.jsonl and
// ground_truth.json under out_dir.
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir);

}  // namespace carescope::synth
