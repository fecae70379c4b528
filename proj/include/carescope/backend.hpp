#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "absa.hpp"
#include "corpus.hpp"

namespace carescope::absa {

enum class BackendKind { kRemoteLlm, kLexicon, kReplayCache };

std::string_view backend_kind_name(BackendKind k);
std::optional<BackendKind> backend_kind_from_name(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::kLexicon;
  std::string model_name = "lexicon-v1";
  int max_retries = 2;
  double request_timeout_s = 30.0;
  double rate_limit_rps = 4.0;          // remote requests per second
  std::string base_url;                 // e.g. https://api.example.com
  std::string api_key_env = "LLM_API_KEY";
  std::filesystem::path cache_dir;      // response cache; required for remote/replay
  int concurrency = 1;
  double failure_abort_ratio = 0.10;    // classify_batch aborts above this
  int backoff_initial_ms = 1000;        // doubles per retry, jittered
  double temperature = 0.0;             // recorded in run metadata

  void validate() const;  // throws UsageError on out-of-range settings
};

// Raw response + transport bookkeeping from one backend call.
struct FetchResult {
  bool ok = false;
  std::string raw;
  std::string error;
  int retries_used = 0;
  bool cache_hit = false;
};

// One JSON file per response, content-addressed by
// sha256(model \n review_id \n prompt_sha256). Writes go through a temp file
// rename so concurrent workers never expose partial content.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);

  std::filesystem::path path_for(const std::string& model, const std::string& review_id,
                                 const std::string& prompt_hash) const;
  std::optional<std::string> lookup(const std::string& model, const std::string& review_id,
                                    const std::string& prompt_hash) const;
  void store(const std::string& model, const std::string& review_id,
             const std::string& prompt_hash, const std::string& raw) const;

 private:
  std::filesystem::path root_;
};

// Transport interface: given a prompt, produce the raw model response.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual FetchResult fetch(const std::string& review_id, const PromptBundle& prompt) = 0;
  virtual std::string_view name() const = 0;
};

// Builds the configured backend. Remote construction fails fast (UsageError)
// when the API key environment variable is unset.
std::unique_ptr<Backend> make_backend(const BackendConfig& config);

// Test seam: a remote-shaped backend with injectable transport outcomes.
using TransportHook = std::function<FetchResult(const std::string& review_id)>;
std::unique_ptr<Backend> make_hooked_backend(const BackendConfig& config, TransportHook hook);

struct ClassifyFailure {
  std::string review_id;
  std::string reason;
};

struct ClassifyStats {
  long n_total = 0;
  long n_ok = 0;
  long n_failed = 0;
  long n_cache_hits = 0;
  long n_backend_calls = 0;
  long n_retries = 0;
  long n_fence_stripped = 0;
};

struct ClassifyOutcome {
  std::optional<AspectSentimentSet> result;
  std::string failure_reason;
  bool cache_hit = false;
  bool fence_stripped = false;
  int retries_used = 0;
};

// Classifies one review: builds the prompt, consults the cache, fetches,
// persists the raw response before parsing, then validates it.
ClassifyOutcome classify(const corpus::Review& review, Backend& backend,
                         const BackendConfig& config);

struct BatchResult {
  std::map<std::string, AspectSentimentSet> results;  // keyed by review_id
  std::vector<ClassifyFailure> failures;              // sorted by review_id
  ClassifyStats stats;
  std::string prompt_hash_of_first;  // recorded in manifests
};

// Runs classify over a review set. The result map is keyed by review_id and
// is therefore independent of completion order and concurrency level.
// Aborts (PipelineError) when the failure ratio exceeds the configured bound.
BatchResult classify_batch(const corpus::ReviewSet& reviews, Backend& backend,
                           const BackendConfig& config);

}  // namespace carescope::absa
