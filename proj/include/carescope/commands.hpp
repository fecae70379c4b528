#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "backend.hpp"
#include "corpus.hpp"
#include "synthetic.hpp"

namespace carescope::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Pipeline configuration: a declarative JSON file plus flag overrides.
struct RunConfig {
  std::filesystem::path out_dir = "out";
  std::filesystem::path reviews_path;
  std::filesystem::path pois_path;
  std::filesystem::path cbg_profiles_path;
  std::filesystem::path cbg_geometries_path;
  std::filesystem::path facility_cbg_path;   // alternate join table
  std::filesystem::path annotations_path;
  std::vector<std::filesystem::path> predictions_paths;
  corpus::InputFormat reviews_format = corpus::InputFormat::kJsonLines;
  corpus::InputFormat pois_format = corpus::InputFormat::kJsonLines;
  std::set<corpus::Region> regions = {corpus::Region::kDmv, corpus::Region::kFl};
  std::string keyword = "urgent care";
  absa::BackendConfig backend;
  long min_reviews = 10;
  std::uint64_t seed = 42;
  synth::GenParams synth_params;

  static RunConfig from_file(const std::filesystem::path& path);
  void merge_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// Holds <out_dir>/.lock for the duration of a subcommand; a second run
// against the same output directory fails fast instead of interleaving.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& out_dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Stage commands. Each validates its inputs, writes its artifacts plus a
// <stage>.manifest.json (config snapshot, input hashes, counts, timings),
// and throws UsageError / PipelineError on fatal problems.
void cmd_ingest(const RunConfig& config);
void cmd_classify(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);
void cmd_aggregate(const RunConfig& config);
void cmd_join_census(const RunConfig& config);
void cmd_fit(const RunConfig& config);
void cmd_report(const RunConfig& config);
void cmd_synthesize(const RunConfig& config);

// Full synthetic round trip with planted-coefficient recovery checks.
// Prints one line per check; returns false when any check fails.
bool cmd_e2e_check(const RunConfig& config);

// Reads persisted sentiments (skipping failure records, counting them).
struct SentimentFile {
  std::map<std::string, absa::AspectSentimentSet> results;
  long n_failure_records = 0;
};
SentimentFile read_sentiments(const std::filesystem::path& path);

}  // namespace carescope::cli
