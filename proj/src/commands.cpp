#include "carescope/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "carescope/aggregate.hpp"
#include "carescope/census.hpp"
#include "carescope/eval.hpp"
#include "carescope/models.hpp"
#include "carescope/util.hpp"

namespace carescope::cli {

namespace {

using nlohmann::json;

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  long elapsed_ms() const {
    return static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start_)
                                 .count());
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Collects inputs/counts for the per-stage manifest. Manifests carry wall
// clock data, so determinism comparisons exclude *.manifest.json files.
class ManifestBuilder {
 public:
  ManifestBuilder(std::string stage, const RunConfig& config)
      : stage_(std::move(stage)), config_(config) {}

  void add_input(const std::filesystem::path& path) {
    if (std::filesystem::exists(path))
      inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
  }
  void count(const std::string& key, long value) { counts_[key] = value; }
  void artifact(const std::filesystem::path& path) { artifacts_.push_back(path.string()); }

  void write(const StageTimer& timer) const {
    json doc{{"stage", stage_},
             {"tool_version", std::string(kToolVersion)},
             {"created_unix_ms", now_ms()},
             {"elapsed_ms", timer.elapsed_ms()},
             {"config", config_.to_json()},
             {"inputs", inputs_},
             {"counts", counts_},
             {"artifacts", artifacts_}};
    write_file_atomic(config_.out_dir / (stage_ + ".manifest.json"), doc.dump(2));
  }

 private:
  std::string stage_;
  const RunConfig& config_;
  json inputs_ = json::array();
  json counts_ = json::object();
  json artifacts_ = json::array();
};

void require_file(const std::filesystem::path& path, const std::string& stage,
                  const std::string& what) {
  if (path.empty())
    throw UsageError(stage + ": no " + what + " configured");
  if (!std::filesystem::exists(path))
    throw PipelineError(stage, what + " not found: " + path.string());
}

void require_artifact(const std::filesystem::path& path, const std::string& stage,
                      const std::string& producer) {
  if (!std::filesystem::exists(path))
    throw PipelineError(stage, "missing " + path.filename().string() + "; run `" +
                                   producer + "` first");
}

std::string sentiment_record(const std::string& review_id,
                             const absa::AspectSentimentSet& labels,
                             const std::string& backend_name,
                             const std::string& prompt_hash) {
  json rec{{"review_id", review_id},
           {"labels", json::object()},
           {"none_flag", labels.none_flag},
           {"backend", backend_name},
           {"prompt_hash", prompt_hash}};
  for (const auto& [aspect, polarity] : labels.labels)
    rec["labels"][std::string(absa::aspect_name(aspect))] =
        std::string(absa::polarity_name(polarity));
  return rec.dump();
}

std::vector<agg::FacilityAspectProfile> read_profiles(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<agg::FacilityAspectProfile> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(agg::profile_from_json(json::parse(line)));
  }
  return out;
}

std::vector<census::EnrichedProfile> read_enriched(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<census::EnrichedProfile> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(census::enriched_from_json(json::parse(line)));
  }
  return out;
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  RunConfig config;
  const json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw UsageError("config: invalid JSON in " + path.string());
  config.merge_json(doc);
  return config;
}

void RunConfig::merge_json(const json& doc) {
  if (!doc.is_object()) throw UsageError("config: expected a JSON object");
  auto path_of = [](const json& v) { return std::filesystem::path(v.get<std::string>()); };
  if (doc.contains("out_dir")) out_dir = path_of(doc["out_dir"]);
  if (doc.contains("reviews")) reviews_path = path_of(doc["reviews"]);
  if (doc.contains("pois")) pois_path = path_of(doc["pois"]);
  if (doc.contains("cbg_profiles")) cbg_profiles_path = path_of(doc["cbg_profiles"]);
  if (doc.contains("cbg_geometries")) cbg_geometries_path = path_of(doc["cbg_geometries"]);
  if (doc.contains("facility_cbg")) facility_cbg_path = path_of(doc["facility_cbg"]);
  if (doc.contains("annotations")) annotations_path = path_of(doc["annotations"]);
  if (doc.contains("predictions")) {
    predictions_paths.clear();
    for (const auto& p : doc["predictions"]) predictions_paths.push_back(path_of(p));
  }
  auto format_of = [](const std::string& name) {
    if (name == "jsonl" || name == "json-lines") return corpus::InputFormat::kJsonLines;
    if (name == "csv") return corpus::InputFormat::kCsv;
    throw UsageError("config: unknown input format " + name);
  };
  if (doc.contains("reviews_format"))
    reviews_format = format_of(doc["reviews_format"].get<std::string>());
  if (doc.contains("pois_format"))
    pois_format = format_of(doc["pois_format"].get<std::string>());
  if (doc.contains("regions")) {
    regions.clear();
    for (const auto& r : doc["regions"]) {
      const auto region = corpus::region_from_name(r.get<std::string>());
      if (!region) throw UsageError("config: unknown region " + r.get<std::string>());
      regions.insert(*region);
    }
  }
  if (doc.contains("keyword")) keyword = doc["keyword"].get<std::string>();
  if (doc.contains("min_reviews")) min_reviews = doc["min_reviews"].get<long>();
  if (doc.contains("seed")) seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("backend")) {
    const json& b = doc["backend"];
    if (b.contains("kind")) {
      const auto kind = absa::backend_kind_from_name(b["kind"].get<std::string>());
      if (!kind) throw UsageError("config: unknown backend kind " +
                                  b["kind"].get<std::string>());
      backend.kind = *kind;
    }
    if (b.contains("model")) backend.model_name = b["model"].get<std::string>();
    if (b.contains("max_retries")) backend.max_retries = b["max_retries"].get<int>();
    if (b.contains("timeout_s")) backend.request_timeout_s = b["timeout_s"].get<double>();
    if (b.contains("rate_limit")) backend.rate_limit_rps = b["rate_limit"].get<double>();
    if (b.contains("base_url")) backend.base_url = b["base_url"].get<std::string>();
    if (b.contains("api_key_env")) backend.api_key_env = b["api_key_env"].get<std::string>();
    if (b.contains("cache_dir")) backend.cache_dir = path_of(b["cache_dir"]);
    if (b.contains("concurrency")) backend.concurrency = b["concurrency"].get<int>();
    if (b.contains("failure_abort_ratio"))
      backend.failure_abort_ratio = b["failure_abort_ratio"].get<double>();
    if (b.contains("backoff_initial_ms"))
      backend.backoff_initial_ms = b["backoff_initial_ms"].get<int>();
    if (b.contains("temperature")) backend.temperature = b["temperature"].get<double>();
  }
  if (doc.contains("synthesize")) {
    const json& s = doc["synthesize"];
    if (s.contains("n_facilities")) synth_params.n_facilities = s["n_facilities"].get<int>();
    if (s.contains("reviews_min")) synth_params.reviews_min = s["reviews_min"].get<int>();
    if (s.contains("reviews_max")) synth_params.reviews_max = s["reviews_max"].get<int>();
    if (s.contains("beta0")) synth_params.beta0 = s["beta0"].get<double>();
    if (s.contains("beta_interpersonal"))
      synth_params.beta_interpersonal = s["beta_interpersonal"].get<double>();
    if (s.contains("beta_opeff")) synth_params.beta_opeff = s["beta_opeff"].get<double>();
    if (s.contains("gamma_density"))
      synth_params.gamma_density = s["gamma_density"].get<double>();
    if (s.contains("noise_sd")) synth_params.noise_sd = s["noise_sd"].get<double>();
    if (s.contains("finances_facility_rate"))
      synth_params.finances_facility_rate = s["finances_facility_rate"].get<double>();
    if (s.contains("n_annotated")) synth_params.n_annotated = s["n_annotated"].get<int>();
    if (s.contains("n_decoys")) synth_params.n_decoys = s["n_decoys"].get<int>();
    if (s.contains("textless_rate"))
      synth_params.textless_rate = s["textless_rate"].get<double>();
  }
}

json RunConfig::to_json() const {
  json regions_json = json::array();
  for (corpus::Region r : regions) regions_json.push_back(std::string(corpus::region_name(r)));
  json predictions_json = json::array();
  for (const auto& p : predictions_paths) predictions_json.push_back(p.string());
  return json{
      {"out_dir", out_dir.string()},
      {"reviews", reviews_path.string()},
      {"pois", pois_path.string()},
      {"cbg_profiles", cbg_profiles_path.string()},
      {"cbg_geometries", cbg_geometries_path.string()},
      {"facility_cbg", facility_cbg_path.string()},
      {"annotations", annotations_path.string()},
      {"predictions", predictions_json},
      {"regions", regions_json},
      {"keyword", keyword},
      {"min_reviews", min_reviews},
      {"seed", seed},
      {"backend",
       {{"kind", std::string(absa::backend_kind_name(backend.kind))},
        {"model", backend.model_name},
        {"max_retries", backend.max_retries},
        {"timeout_s", backend.request_timeout_s},
        {"rate_limit", backend.rate_limit_rps},
        {"base_url", backend.base_url},
        {"api_key_env", backend.api_key_env},
        {"cache_dir", backend.cache_dir.string()},
        {"concurrency", backend.concurrency},
        {"failure_abort_ratio", backend.failure_abort_ratio},
        {"backoff_initial_ms", backend.backoff_initial_ms},
        {"temperature", backend.temperature}}},
      {"synthesize",
       {{"n_facilities", synth_params.n_facilities},
        {"reviews_min", synth_params.reviews_min},
        {"reviews_max", synth_params.reviews_max},
        {"beta0", synth_params.beta0},
        {"beta_interpersonal", synth_params.beta_interpersonal},
        {"beta_opeff", synth_params.beta_opeff},
        {"gamma_density", synth_params.gamma_density},
        {"noise_sd", synth_params.noise_sd},
        {"finances_facility_rate", synth_params.finances_facility_rate},
        {"n_annotated", synth_params.n_annotated},
        {"n_decoys", synth_params.n_decoys},
        {"textless_rate", synth_params.textless_rate}}}};
}

OutputLock::OutputLock(const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  path_ = out_dir / ".lock";
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw UsageError("output directory is locked by another run: " + path_.string());
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

SentimentFile read_sentiments(const std::filesystem::path& path) {
  SentimentFile out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const json rec = json::parse(line);
    if (rec.contains("error")) {
      ++out.n_failure_records;
      continue;
    }
    absa::AspectSentimentSet s;
    s.review_id = rec.at("review_id").get<std::string>();
    s.none_flag = rec.value("none_flag", false);
    for (const auto& [key, value] : rec.at("labels").items()) {
      const auto aspect = absa::aspect_from_name(key);
      const auto polarity = absa::polarity_from_name(value.get<std::string>());
      if (!aspect || !polarity)
        throw PipelineError("sentiments", "bad record for review " + s.review_id);
      s.labels[*aspect] = *polarity;
    }
    out.results.emplace(s.review_id, std::move(s));
  }
  return out;
}

void cmd_ingest(const RunConfig& config) {
  StageTimer timer;
  require_file(config.reviews_path, "ingest", "reviews file");
  require_file(config.pois_path, "ingest", "poi file");
  OutputLock lock(config.out_dir);
  ManifestBuilder manifest("ingest", config);
  manifest.add_input(config.reviews_path);
  manifest.add_input(config.pois_path);

  const auto all_facilities = corpus::load_facilities(config.pois_path, config.pois_format);
  const auto urgent = corpus::filter_urgent_care(all_facilities, config.keyword);
  const auto regional = corpus::filter_region(urgent, config.regions);

  const auto all_reviews = corpus::load_reviews(config.reviews_path, config.reviews_format);
  const auto with_text = corpus::drop_textless(all_reviews);

  // Keep only reviews that join to the retained facilities.
  corpus::ReviewSet joined;
  joined.n_malformed = with_text.n_malformed;
  {
    std::set<std::string> keep;
    for (const auto& f : regional.items) keep.insert(f.facility_id);
    for (const auto& r : with_text.items)
      if (keep.contains(r.facility_id)) joined.items.push_back(r);
  }

  const corpus::CorpusSummary summary = corpus_summary(with_text, regional);

  std::string facilities_out;
  for (const auto& f : regional.items) {
    facilities_out += corpus::facility_to_jsonl(f);
    facilities_out += "\n";
  }
  write_file_atomic(config.out_dir / "facilities.filtered.jsonl", facilities_out);

  std::string reviews_out;
  for (const auto& r : joined.items) {
    reviews_out += corpus::review_to_jsonl(r);
    reviews_out += "\n";
  }
  write_file_atomic(config.out_dir / "reviews.filtered.jsonl", reviews_out);

  json summary_json = summary.to_json();
  summary_json["n_reviews_malformed"] = all_reviews.n_malformed;
  summary_json["n_facilities_malformed"] = all_facilities.n_malformed;
  summary_json["n_unresolved_region_dropped"] = regional.n_unresolved_region_dropped;
  summary_json["n_reviews_joined"] = static_cast<long>(joined.items.size());
  write_file_atomic(config.out_dir / "corpus_summary.json", summary_json.dump(2));

  manifest.count("facilities_in", static_cast<long>(all_facilities.items.size()));
  manifest.count("facilities_kept", static_cast<long>(regional.items.size()));
  manifest.count("reviews_in", static_cast<long>(all_reviews.items.size()));
  manifest.count("reviews_with_text", static_cast<long>(with_text.items.size()));
  manifest.count("reviews_joined", static_cast<long>(joined.items.size()));
  manifest.count("reviews_malformed", all_reviews.n_malformed);
  manifest.artifact(config.out_dir / "facilities.filtered.jsonl");
  manifest.artifact(config.out_dir / "reviews.filtered.jsonl");
  manifest.artifact(config.out_dir / "corpus_summary.json");
  manifest.write(timer);
}

void cmd_classify(const RunConfig& config) {
  StageTimer timer;
  const auto reviews_path = config.out_dir / "reviews.filtered.jsonl";
  require_artifact(reviews_path, "classify", "ingest");
  // Fail fast on missing API keys before any request is attempted.
  absa::BackendConfig backend_config = config.backend;
  if (backend_config.cache_dir.empty() &&
      backend_config.kind != absa::BackendKind::kLexicon)
    backend_config.cache_dir = config.out_dir / "cache";
  auto backend = absa::make_backend(backend_config);

  OutputLock lock(config.out_dir);
  ManifestBuilder manifest("classify", config);
  manifest.add_input(reviews_path);

  corpus::ReviewSet reviews = corpus::load_reviews(reviews_path, corpus::InputFormat::kJsonLines);

  // Resume support: prior successful records short-circuit; failures retry.
  std::map<std::string, std::string> existing;  // review_id -> serialized record
  const auto sentiments_path = config.out_dir / "sentiments.jsonl";
  long resumed = 0;
  if (std::filesystem::exists(sentiments_path)) {
    std::istringstream in(read_file(sentiments_path));
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded() || rec.contains("error") || !rec.contains("review_id"))
        continue;
      existing.emplace(rec["review_id"].get<std::string>(), line);
    }
  }
  corpus::ReviewSet pending;
  for (auto& r : reviews.items) {
    if (existing.contains(r.review_id))
      ++resumed;
    else
      pending.items.push_back(std::move(r));
  }

  absa::BatchResult batch;
  if (!pending.items.empty())
    batch = absa::classify_batch(pending, *backend, backend_config);

  // Records sorted by review_id; reruns produce byte-identical output.
  std::map<std::string, std::string> records = std::move(existing);
  std::map<std::string, const corpus::Review*> pending_index;
  for (const auto& r : pending.items) pending_index.emplace(r.review_id, &r);
  for (const auto& [review_id, labels] : batch.results) {
    const auto it = pending_index.find(review_id);
    const std::string hash =
        it != pending_index.end()
            ? absa::prompt_sha256(absa::build_prompt(it->second->text))
            : "";
    records[review_id] = sentiment_record(review_id, labels,
                                          std::string(backend->name()), hash);
  }
  for (const auto& failure : batch.failures) {
    records[failure.review_id] = json{{"review_id", failure.review_id},
                                      {"error", failure.reason},
                                      {"backend", std::string(backend->name())}}
                                     .dump();
  }
  std::string out;
  for (const auto& [_, line] : records) {
    out += line;
    out += "\n";
  }
  write_file_atomic(sentiments_path, out);

  json summary{{"n_reviews", reviews.items.size()},
               {"n_resumed", resumed},
               {"n_classified", batch.stats.n_ok},
               {"n_failed", batch.stats.n_failed},
               {"n_cache_hits", batch.stats.n_cache_hits},
               {"n_backend_calls", batch.stats.n_backend_calls},
               {"n_retries", batch.stats.n_retries},
               {"n_fence_stripped", batch.stats.n_fence_stripped},
               {"backend", std::string(backend->name())},
               {"model", backend_config.model_name},
               {"temperature", backend_config.temperature}};
  write_file_atomic(config.out_dir / "classify_summary.json", summary.dump(2));

  manifest.count("n_reviews", static_cast<long>(reviews.items.size()));
  manifest.count("n_resumed", resumed);
  manifest.count("n_classified", batch.stats.n_ok);
  manifest.count("n_failed", batch.stats.n_failed);
  manifest.count("n_cache_hits", batch.stats.n_cache_hits);
  manifest.count("n_backend_calls", batch.stats.n_backend_calls);
  manifest.count("n_retries", batch.stats.n_retries);
  manifest.artifact(sentiments_path);
  manifest.artifact(config.out_dir / "classify_summary.json");
  manifest.write(timer);
}

void cmd_evaluate(const RunConfig& config) {
  StageTimer timer;
  require_file(config.annotations_path, "evaluate", "annotations CSV");
  std::vector<std::filesystem::path> prediction_files = config.predictions_paths;
  if (prediction_files.empty()) {
    const auto default_path = config.out_dir / "sentiments.jsonl";
    require_artifact(default_path, "evaluate", "classify");
    prediction_files.push_back(default_path);
  }
  OutputLock lock(config.out_dir);
  ManifestBuilder manifest("evaluate", config);
  manifest.add_input(config.annotations_path);

  const auto annotations = eval::load_annotations_csv(config.annotations_path);
  const eval::GoldSet gold = eval::majority_vote(annotations);

  for (const auto& path : prediction_files) {
    require_file(path, "evaluate", "predictions file");
    manifest.add_input(path);
    const SentimentFile sentiments = read_sentiments(path);

    // Score the overlap; gold reviews the predictions never covered are
    // reported, not fatal (a fresh backend may have been run on a subset).
    std::map<std::string, absa::AspectSentimentSet> predictions;
    eval::GoldSet covered;
    std::set<std::string> uncovered;
    for (const auto& [key, polarity] : gold.entries) {
      auto it = sentiments.results.find(key.review_id);
      if (it == sentiments.results.end()) {
        uncovered.insert(key.review_id);
        continue;
      }
      covered.entries.emplace(key, polarity);
      predictions.emplace(key.review_id, it->second);
    }
    if (covered.entries.empty())
      throw PipelineError("evaluate", "no overlapping review_ids between gold and " +
                                          path.string());

    const auto rows = eval::flatten(covered, predictions);
    const eval::EvalReport report = eval::score(rows);

    std::string backend_name = "predictions";
    if (!sentiments.results.empty()) {
      // Backend recorded in the prediction records themselves.
      std::istringstream in(read_file(path));
      std::string line;
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const json rec = json::parse(line, nullptr, false);
        if (!rec.is_discarded() && rec.contains("backend")) {
          backend_name = rec["backend"].get<std::string>();
          break;
        }
      }
    }
    std::string slug;
    for (char c : backend_name)
      slug += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';

    json report_json = report.to_json();
    report_json["backend"] = backend_name;
    report_json["n_gold_entries"] = gold.entries.size();
    report_json["n_gold_scored"] = covered.entries.size();
    report_json["n_gold_reviews_uncovered"] = uncovered.size();
    report_json["n_unresolved_ties"] = gold.unresolved.size();
    write_file_atomic(config.out_dir / ("eval_" + slug + ".json"), report_json.dump(2));
    write_file_atomic(config.out_dir / ("eval_" + slug + ".txt"),
                      "Backend: " + backend_name + "\n" + report.to_table());
    manifest.artifact(config.out_dir / ("eval_" + slug + ".json"));
    manifest.artifact(config.out_dir / ("eval_" + slug + ".txt"));
  }
  manifest.count("n_gold_entries", static_cast<long>(gold.entries.size()));
  manifest.count("n_unresolved_ties", static_cast<long>(gold.unresolved.size()));
  manifest.write(timer);
}

void cmd_aggregate(const RunConfig& config) {
  StageTimer timer;
  const auto reviews_path = config.out_dir / "reviews.filtered.jsonl";
  const auto facilities_path = config.out_dir / "facilities.filtered.jsonl";
  const auto sentiments_path = config.out_dir / "sentiments.jsonl";
  require_artifact(reviews_path, "aggregate", "ingest");
  require_artifact(facilities_path, "aggregate", "ingest");
  require_artifact(sentiments_path, "aggregate", "classify");
  OutputLock lock(config.out_dir);
  ManifestBuilder manifest("aggregate", config);
  manifest.add_input(reviews_path);
  manifest.add_input(facilities_path);
  manifest.add_input(sentiments_path);

  const auto reviews = corpus::load_reviews(reviews_path, corpus::InputFormat::kJsonLines);
  const auto facilities =
      corpus::load_facilities(facilities_path, corpus::InputFormat::kJsonLines);
  const SentimentFile sentiments = read_sentiments(sentiments_path);

  const agg::ProfilesResult profiles =
      agg::facility_profiles(facilities, reviews, sentiments.results);
  const auto summaries = agg::region_summary(profiles.profiles, reviews, sentiments.results);

  std::string profiles_out;
  for (const auto& p : profiles.profiles) {
    profiles_out += agg::profile_to_json(p).dump();
    profiles_out += "\n";
  }
  write_file_atomic(config.out_dir / "profiles.jsonl", profiles_out);
  write_file_atomic(config.out_dir / "profiles.csv",
                    agg::profiles_to_csv(profiles.profiles));
  write_file_atomic(config.out_dir / "region_summary.json",
                    agg::region_summaries_to_json(summaries).dump(2));

  manifest.count("n_profiles", static_cast<long>(profiles.profiles.size()));
  manifest.count("n_skipped_no_text", profiles.n_skipped_no_text);
  manifest.count("n_sentiment_failures", sentiments.n_failure_records);
  manifest.artifact(config.out_dir / "profiles.jsonl");
  manifest.artifact(config.out_dir / "profiles.csv");
  manifest.artifact(config.out_dir / "region_summary.json");
  manifest.write(timer);
}

void cmd_join_census(const RunConfig& config) {
  StageTimer timer;
  const auto profiles_path = config.out_dir / "profiles.jsonl";
  require_artifact(profiles_path, "join-census", "aggregate");
  require_file(config.cbg_profiles_path, "join-census", "cbg covariates CSV");
  const bool mapped = !config.facility_cbg_path.empty();
  if (!mapped)
    require_file(config.cbg_geometries_path, "join-census", "cbg geometries GeoJSON");
  OutputLock lock(config.out_dir);
  ManifestBuilder manifest("join-census", config);
  manifest.add_input(profiles_path);
  manifest.add_input(config.cbg_profiles_path);

  const auto profiles = read_profiles(profiles_path);
  const census::CbgLoadResult cbg = census::load_cbg_profiles(config.cbg_profiles_path);

  census::JoinResult joined;
  if (mapped) {
    require_file(config.facility_cbg_path, "join-census", "facility-cbg join CSV");
    manifest.add_input(config.facility_cbg_path);
    const auto table = census::load_facility_cbg_csv(config.facility_cbg_path);
    joined = census::join_covariates_mapped(profiles, table, cbg.profiles);
  } else {
    manifest.add_input(config.cbg_geometries_path);
    const auto facilities_path = config.out_dir / "facilities.filtered.jsonl";
    require_artifact(facilities_path, "join-census", "ingest");
    const auto facilities =
        corpus::load_facilities(facilities_path, corpus::InputFormat::kJsonLines);
    const auto geometries = census::load_cbg_geojson(config.cbg_geometries_path);
    joined = census::join_covariates(profiles, facilities, cbg.profiles, geometries);
  }

  std::string enriched_out;
  for (const auto& e : joined.enriched) {
    enriched_out += census::enriched_to_json(e).dump();
    enriched_out += "\n";
  }
  write_file_atomic(config.out_dir / "enriched.jsonl", enriched_out);

  const json summary{{"n_profiles", profiles.size()},
                     {"n_enriched", joined.enriched.size()},
                     {"n_unassigned", joined.n_unassigned},
                     {"n_missing_cbg", joined.n_missing_cbg},
                     {"n_cbg_rows", cbg.profiles.size()},
                     {"n_cbg_rejected", cbg.n_rejected}};
  write_file_atomic(config.out_dir / "join_summary.json", summary.dump(2));

  manifest.count("n_enriched", static_cast<long>(joined.enriched.size()));
  manifest.count("n_unassigned", joined.n_unassigned);
  manifest.count("n_missing_cbg", joined.n_missing_cbg);
  manifest.count("n_cbg_rejected", cbg.n_rejected);
  manifest.artifact(config.out_dir / "enriched.jsonl");
  manifest.artifact(config.out_dir / "join_summary.json");
  manifest.write(timer);
}

void cmd_fit(const RunConfig& config) {
  StageTimer timer;
  const auto enriched_path = config.out_dir / "enriched.jsonl";
  require_artifact(enriched_path, "fit", "join-census");
  OutputLock lock(config.out_dir);
  ManifestBuilder manifest("fit", config);
  manifest.add_input(enriched_path);

  const auto enriched = read_enriched(enriched_path);
  const agg::FilterPolicy strict = agg::FilterPolicy::uniform(config.min_reviews);
  const agg::FilterPolicy relaxed = strict.relaxed_finances();

  const stats::SensitivityResult sensitivity =
      stats::sensitivity_run(enriched, strict, relaxed);

  std::vector<agg::FacilityAspectProfile> strict_base;
  std::vector<census::EnrichedProfile> strict_enriched;
  for (const auto& e : enriched) {
    bool keep = true;
    for (const auto& [aspect, threshold] : strict.min_per_aspect)
      if (e.profile.count_of(aspect) < threshold) {
        keep = false;
        break;
      }
    if (keep) {
      strict_base.push_back(e.profile);
      strict_enriched.push_back(e);
    }
  }

  const stats::RegressionFit model1 = stats::fit_model1(strict_base);
  const stats::RegressionFit model2 = stats::fit_model2(strict_enriched);
  const stats::RegressionFit interactions = stats::fit_interactions(strict_enriched);
  const stats::VifReport vif_report = stats::model2_vif(strict_enriched);

  json fits{{"model1", model1.to_json()},
            {"model2", model2.to_json()},
            {"interactions", interactions.to_json()},
            {"sensitivity",
             {{"strict", sensitivity.strict_fit.to_json()},
              {"relaxed", sensitivity.relaxed_fit.to_json()},
              {"n_strict", sensitivity.n_strict},
              {"n_relaxed", sensitivity.n_relaxed}}},
            {"n_sample", strict_base.size()},
            {"min_reviews", config.min_reviews}};
  write_file_atomic(config.out_dir / "fits.json", fits.dump(2));

  std::string tables;
  tables += model1.to_table("Model 1: Sentiment Scores Only");
  tables += "\n";
  tables += model2.to_table("Model 2: Sentiment Scores + Socioeconomic Factors");
  tables += "\n";
  tables += interactions.to_table("Sensitivity: Centered Interactions");
  tables += "\n";
  tables += sensitivity.relaxed_fit.to_table(
      "Sensitivity: Finances Threshold Relaxed (n = " +
      std::to_string(sensitivity.n_relaxed) + ")");
  tables += "\n";
  tables += vif_report.to_table();
  write_file_atomic(config.out_dir / "fits.txt", tables);
  write_file_atomic(config.out_dir / "vif.json", vif_report.to_json().dump(2));

  manifest.count("n_sample_strict", sensitivity.n_strict);
  manifest.count("n_sample_relaxed", sensitivity.n_relaxed);
  manifest.artifact(config.out_dir / "fits.json");
  manifest.artifact(config.out_dir / "fits.txt");
  manifest.artifact(config.out_dir / "vif.json");
  manifest.write(timer);
}

void cmd_report(const RunConfig& config) {
  StageTimer timer;
  const auto profiles_path = config.out_dir / "profiles.jsonl";
  const auto facilities_path = config.out_dir / "facilities.filtered.jsonl";
  const auto region_path = config.out_dir / "region_summary.json";
  const auto fits_path = config.out_dir / "fits.json";
  require_artifact(profiles_path, "report", "aggregate");
  require_artifact(region_path, "report", "aggregate");
  require_artifact(facilities_path, "report", "ingest");
  require_artifact(fits_path, "report", "fit");
  OutputLock lock(config.out_dir);
  ManifestBuilder manifest("report", config);
  manifest.add_input(profiles_path);
  manifest.add_input(facilities_path);
  manifest.add_input(region_path);
  manifest.add_input(fits_path);

  const auto profiles = read_profiles(profiles_path);
  const auto facilities =
      corpus::load_facilities(facilities_path, corpus::InputFormat::kJsonLines);

  // Correlation matrices over the filtered sample, pooled and per region.
  const auto filtered =
      agg::apply_filter(profiles, agg::FilterPolicy::uniform(config.min_reviews));
  stats::CorrMatrixResult corr = stats::corr_matrix(filtered, false);
  const stats::CorrMatrixResult by_region = stats::corr_matrix(filtered, true);
  corr.matrices.insert(corr.matrices.end(), by_region.matrices.begin(),
                       by_region.matrices.end());
  corr.warnings.insert(corr.warnings.end(), by_region.warnings.begin(),
                       by_region.warnings.end());
  write_file_atomic(config.out_dir / "correlations.json",
                    stats::corr_matrices_to_json(corr).dump(2));

  // GeoJSON map: one Point feature per profiled facility.
  json features = json::array();
  for (const auto& p : profiles) {
    const corpus::Facility* f = facilities.find(p.facility_id);
    if (f == nullptr) continue;
    json props{{"facility_id", p.facility_id},
               {"name", f->name},
               {"region", std::string(corpus::region_name(p.region))},
               {"mean_rating", p.mean_rating},
               {"n_text_reviews", p.n_text_reviews}};
    for (absa::Aspect a : absa::kAllAspects) {
      const std::string name(absa::aspect_name(a));
      auto it = p.aspect_mean.find(a);
      props["mean " + name] = it == p.aspect_mean.end() ? json() : json(it->second);
      props["count " + name] = p.count_of(a);
    }
    features.push_back(
        {{"type", "Feature"},
         {"geometry",
          {{"type", "Point"}, {"coordinates", {f->longitude, f->latitude}}}},
         {"properties", props}});
  }
  const json geojson{{"type", "FeatureCollection"}, {"features", features}};
  write_file_atomic(config.out_dir / "map.geojson", geojson.dump());

  // Box-plot arrays per region, lifted from the aggregate stage output.
  const json region_summary = json::parse(read_file(region_path));
  json boxplots = json::object();
  for (const auto& region : region_summary.at("regions")) {
    json per_aspect = json::object();
    for (const auto& [aspect, entry] : region.at("aspects").items())
      if (entry.contains("box")) per_aspect[aspect] = entry["box"];
    boxplots[region.at("region").get<std::string>()] = per_aspect;
  }
  write_file_atomic(config.out_dir / "boxplots.json", boxplots.dump(2));

  // Human-readable report: fit tables plus regional headlines.
  const json fits = json::parse(read_file(fits_path));
  std::ostringstream report;
  report << "Pipeline report (tool " << kToolVersion << ")\n\n";
  report << read_file(config.out_dir / "fits.txt") << "\n";
  report << "Regional summary\n";
  char buf[160];
  for (const auto& region : region_summary.at("regions")) {
    std::snprintf(buf, sizeof buf, "%-6s mean rating %.2f over %ld text reviews, %ld facilities\n",
                  region.at("region").get<std::string>().c_str(),
                  region.at("mean_rating").get<double>(),
                  region.at("n_text_reviews").get<long>(),
                  region.at("n_facilities").get<long>());
    report << buf;
  }
  report << "\nFit sample sizes: strict n = " << fits.at("sensitivity").at("n_strict")
         << ", relaxed n = " << fits.at("sensitivity").at("n_relaxed") << "\n";
  write_file_atomic(config.out_dir / "report.txt", report.str());

  manifest.count("n_features", static_cast<long>(features.size()));
  manifest.count("n_corr_matrices", static_cast<long>(corr.matrices.size()));
  manifest.artifact(config.out_dir / "correlations.json");
  manifest.artifact(config.out_dir / "map.geojson");
  manifest.artifact(config.out_dir / "boxplots.json");
  manifest.artifact(config.out_dir / "report.txt");
  manifest.write(timer);
}

void cmd_synthesize(const RunConfig& config) {
  StageTimer timer;
  OutputLock lock(config.out_dir);
  ManifestBuilder manifest("synthesize", config);
  synth::GenParams params = config.synth_params;
  params.seed = config.seed;
  const synth::SyntheticCorpus corpus = synth::synthesize(params);
  synth::write_corpus(corpus, config.out_dir);
  manifest.count("n_facilities", static_cast<long>(corpus.facilities.items.size()));
  manifest.count("n_reviews", static_cast<long>(corpus.reviews.items.size()));
  manifest.count("n_annotation_records", static_cast<long>(corpus.annotations.size()));
  for (const char* name :
       {"reviews.jsonl", "facilities.jsonl", "cbg_profiles.csv",
        "cbg_geometries.geojson", "annotations.csv", "truth_labels.jsonl",
        "ground_truth.json"})
    manifest.artifact(config.out_dir / name);
  manifest.write(timer);
}

bool cmd_e2e_check(const RunConfig& config) {
  RunConfig stage = config;
  stage.reviews_path = config.out_dir / "reviews.jsonl";
  stage.backend.kind = absa::BackendKind::kLexicon;
  stage.backend.model_name = "lexicon-v1";
  stage.cbg_profiles_path = config.out_dir / "cbg_profiles.csv";
  stage.cbg_geometries_path = config.out_dir / "cbg_geometries.geojson";
  stage.facility_cbg_path.clear();

  cmd_synthesize(stage);
  stage.pois_path = config.out_dir / "facilities.jsonl";
  cmd_ingest(stage);
  cmd_classify(stage);
  cmd_aggregate(stage);
  cmd_join_census(stage);
  cmd_fit(stage);

  // Checks against the planted ground truth.
  const json fits = json::parse(read_file(config.out_dir / "fits.json"));
  const json truth = json::parse(read_file(config.out_dir / "ground_truth.json"));
  const json& model2 = fits.at("model2");

  auto coef_of = [&](const json& fit, const std::string& column) {
    const auto& names = fit.at("columns");
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i].get<std::string>() == column)
        return std::pair<double, double>(fit.at("coef")[i].get<double>(),
                                         fit.at("p")[i].get<double>());
    throw PipelineError("e2e-check", "column " + column + " missing from fit");
  };

  const double beta_interp = truth.at("params").at("beta_interpersonal").get<double>();
  const double beta_opeff = truth.at("params").at("beta_opeff").get<double>();
  const double gamma_density = truth.at("params").at("gamma_density").get<double>();

  bool all_ok = true;
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << " (" << detail << ")\n";
    all_ok = all_ok && ok;
  };

  {
    const auto [coef, p] = coef_of(model2, "Interpersonal Factors");
    char detail[128];
    std::snprintf(detail, sizeof detail, "coef %.4f, p %.3g, planted %.2f", coef, p,
                  beta_interp);
    check("interpersonal coefficient recovered",
          coef >= beta_interp - 0.2 && coef <= beta_interp + 0.2 && p < 0.001, detail);
  }
  {
    const auto [coef, p] = coef_of(model2, "Operational Efficiency");
    char detail[128];
    std::snprintf(detail, sizeof detail, "coef %.4f, p %.3g, planted %.2f", coef, p,
                  beta_opeff);
    check("operational efficiency coefficient recovered",
          coef >= beta_opeff - 0.1 && coef <= beta_opeff + 0.1 && p < 0.001, detail);
  }
  {
    const auto [coef, p] = coef_of(model2, "Population Density");
    char detail[128];
    std::snprintf(detail, sizeof detail, "coef %.4f, p %.3g, planted %.3f", coef, p,
                  gamma_density);
    if (gamma_density > 0)
      check("population density effect detected", coef > 0 && p < 0.05, detail);
  }
  for (const char* column : {"Technical Quality", "Finances", "Facilities/Availability"}) {
    const auto [coef, p] = coef_of(model2, column);
    char detail[128];
    std::snprintf(detail, sizeof detail, "coef %.4f, p %.3g (no planted effect)", coef, p);
    check(std::string(column) + " stays insignificant", p > 0.05, detail);
  }

  // Lexicon agreement with the planted labels.
  {
    const SentimentFile sentiments = read_sentiments(config.out_dir / "sentiments.jsonl");
    long total = 0, matched = 0;
    std::istringstream in(read_file(config.out_dir / "truth_labels.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const json rec = json::parse(line);
      const std::string review_id = rec.at("review_id").get<std::string>();
      auto it = sentiments.results.find(review_id);
      if (it == sentiments.results.end()) continue;
      for (const auto& [aspect_name, polarity] : rec.at("labels").items()) {
        ++total;
        const auto aspect = absa::aspect_from_name(aspect_name);
        auto found = it->second.labels.find(*aspect);
        if (found != it->second.labels.end() &&
            absa::polarity_name(found->second) == polarity.get<std::string>())
          ++matched;
      }
    }
    const double agreement = total > 0 ? static_cast<double>(matched) / total : 0.0;
    char detail[128];
    std::snprintf(detail, sizeof detail, "%ld/%ld labels, %.4f", matched, total, agreement);
    check("lexicon labels match planted labels >= 99%", agreement >= 0.99, detail);
  }
  return all_ok;
}

}  // namespace carescope::cli
