#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "carescope/backend.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <random>
#include <thread>

#include "carescope/lexicon.hpp"
#include "carescope/util.hpp"

namespace carescope::absa {

namespace {

using nlohmann::json;

void sleep_ms(long ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

// Shared pacing gate for remote calls.
class RateLimiter {
 public:
  explicit RateLimiter(double rps) : interval_ms_(rps > 0 ? 1000.0 / rps : 0.0) {}

  void acquire() {
    if (interval_ms_ <= 0) return;
    std::chrono::steady_clock::time_point wake;
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      if (next_ < now) next_ = now;
      wake = next_;
      next_ += std::chrono::milliseconds(static_cast<long>(interval_ms_));
    }
    std::this_thread::sleep_until(wake);
  }

 private:
  double interval_ms_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

// Retry wrapper shared by the remote and hooked backends: exponential
// backoff starting at backoff_initial_ms, doubling, with uniform jitter.
class RetryingBackend : public Backend {
 public:
  RetryingBackend(const BackendConfig& config, std::string name)
      : config_(config), name_(std::move(name)), limiter_(config.rate_limit_rps),
        jitter_rng_(std::random_device{}()) {}

  FetchResult fetch(const std::string& review_id, const PromptBundle& prompt) override {
    FetchResult last;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        last.retries_used = attempt;
        sleep_ms(backoff_ms(attempt));
      }
      limiter_.acquire();
      FetchResult r = fetch_once(review_id, prompt);
      r.retries_used = attempt;
      if (r.ok) return r;
      last = r;
    }
    return last;
  }

  std::string_view name() const override { return name_; }

 protected:
  virtual FetchResult fetch_once(const std::string& review_id,
                                 const PromptBundle& prompt) = 0;

  const BackendConfig config_;

 private:
  long backoff_ms(int attempt) {
    const long base = config_.backoff_initial_ms << (attempt - 1);
    std::uniform_int_distribution<long> jitter(0, std::max<long>(1, base / 2));
    std::lock_guard<std::mutex> lock(mu_);
    return base + jitter(jitter_rng_);
  }

  std::string name_;
  RateLimiter limiter_;
  std::mutex mu_;
  std::mt19937_64 jitter_rng_;
};

class LexiconBackend : public Backend {
 public:
  FetchResult fetch(const std::string&, const PromptBundle& prompt) override {
    FetchResult r;
    r.ok = true;
    r.raw = lexicon_raw_response(review_body(prompt));
    return r;
  }
  std::string_view name() const override { return "lexicon"; }

 private:
  // The prompt's text segment is "The review content is: <review>\n".
  static std::string_view review_body(const PromptBundle& prompt) {
    std::string_view body = prompt.text;
    constexpr std::string_view kPrefix = "The review content is: ";
    if (body.starts_with(kPrefix)) body.remove_prefix(kPrefix.size());
    if (body.ends_with('\n')) body.remove_suffix(1);
    return body;
  }
};

class ReplayCacheBackend : public Backend {
 public:
  explicit ReplayCacheBackend(const BackendConfig& config)
      : cache_(config.cache_dir), model_(config.model_name) {
    if (config.cache_dir.empty())
      throw UsageError("replay-cache backend requires a cache directory");
  }

  FetchResult fetch(const std::string& review_id, const PromptBundle& prompt) override {
    FetchResult r;
    const std::string hash = prompt_sha256(prompt);
    if (auto raw = cache_.lookup(model_, review_id, hash)) {
      r.ok = true;
      r.cache_hit = true;
      r.raw = std::move(*raw);
    } else {
      r.error = "replay cache miss";
    }
    return r;
  }
  std::string_view name() const override { return "replay-cache"; }

 private:
  ResponseCache cache_;
  std::string model_;
};

class RemoteBackend : public RetryingBackend {
 public:
  explicit RemoteBackend(const BackendConfig& config)
      : RetryingBackend(config, "remote-llm:" + config.model_name) {
    if (config.base_url.empty())
      throw UsageError("remote backend requires a base URL");
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
      throw UsageError("API key environment variable " + config.api_key_env +
                       " is not set");
    api_key_ = key;
  }

 protected:
  FetchResult fetch_once(const std::string&, const PromptBundle& prompt) override {
    FetchResult r;
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<long>(config_.request_timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<long>(config_.request_timeout_s * 1000)));
    client.set_bearer_token_auth(api_key_);

    const json body{{"model", config_.model_name},
                    {"temperature", config_.temperature},
                    {"messages",
                     json::array({{{"role", "user"}, {"content", prompt.concat()}}})}};
    auto res = client.Post("/v1/chat/completions", body.dump(), "application/json");
    if (!res) {
      r.error = "transport: " + httplib::to_string(res.error());
      return r;
    }
    if (res->status != 200) {
      r.error = "http status " + std::to_string(res->status);
      return r;
    }
    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message")) {
      r.error = "malformed completion envelope";
      return r;
    }
    const auto& message = reply["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string()) {
      r.error = "completion without content";
      return r;
    }
    r.ok = true;
    r.raw = message["content"].get<std::string>();
    return r;
  }

 private:
  std::string api_key_;
};

class HookedBackend : public RetryingBackend {
 public:
  HookedBackend(const BackendConfig& config, TransportHook hook)
      : RetryingBackend(config, "hooked"), hook_(std::move(hook)) {}

 protected:
  FetchResult fetch_once(const std::string& review_id, const PromptBundle&) override {
    return hook_(review_id);
  }

 private:
  TransportHook hook_;
};

}  // namespace

std::string_view backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::kRemoteLlm: return "remote-llm";
    case BackendKind::kLexicon: return "lexicon";
    case BackendKind::kReplayCache: return "replay-cache";
  }
  throw std::logic_error("unreachable backend kind");
}

std::optional<BackendKind> backend_kind_from_name(std::string_view name) {
  if (name == "remote-llm") return BackendKind::kRemoteLlm;
  if (name == "lexicon") return BackendKind::kLexicon;
  if (name == "replay-cache") return BackendKind::kReplayCache;
  return std::nullopt;
}

void BackendConfig::validate() const {
  if (max_retries < 0) throw UsageError("backend: max_retries must be >= 0");
  if (rate_limit_rps <= 0) throw UsageError("backend: rate_limit must be > 0");
  if (request_timeout_s <= 0) throw UsageError("backend: timeout must be > 0");
  if (concurrency < 1) throw UsageError("backend: concurrency must be >= 1");
  if (failure_abort_ratio < 0 || failure_abort_ratio > 1)
    throw UsageError("backend: failure abort ratio must be in [0,1]");
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path ResponseCache::path_for(const std::string& model,
                                              const std::string& review_id,
                                              const std::string& prompt_hash) const {
  const std::string key = sha256_hex(model + "\n" + review_id + "\n" + prompt_hash);
  return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::lookup(const std::string& model,
                                                 const std::string& review_id,
                                                 const std::string& prompt_hash) const {
  const auto path = path_for(model, review_id, prompt_hash);
  if (!std::filesystem::exists(path)) return std::nullopt;
  const json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.contains("raw") || !doc["raw"].is_string())
    return std::nullopt;
  return doc["raw"].get<std::string>();
}

void ResponseCache::store(const std::string& model, const std::string& review_id,
                          const std::string& prompt_hash, const std::string& raw) const {
  const auto path = path_for(model, review_id, prompt_hash);
  const json doc{{"model", model},
                 {"review_id", review_id},
                 {"prompt_hash", prompt_hash},
                 {"raw", raw}};
  write_file_atomic(path, doc.dump());
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  switch (config.kind) {
    case BackendKind::kLexicon: return std::make_unique<LexiconBackend>();
    case BackendKind::kReplayCache: return std::make_unique<ReplayCacheBackend>(config);
    case BackendKind::kRemoteLlm: return std::make_unique<RemoteBackend>(config);
  }
  throw std::logic_error("unreachable backend kind");
}

std::unique_ptr<Backend> make_hooked_backend(const BackendConfig& config,
                                             TransportHook hook) {
  config.validate();
  return std::make_unique<HookedBackend>(config, std::move(hook));
}

ClassifyOutcome classify(const corpus::Review& review, Backend& backend,
                         const BackendConfig& config) {
  ClassifyOutcome outcome;
  if (!review.has_text()) {
    outcome.failure_reason = "review has no text";
    return outcome;
  }
  const PromptBundle prompt = build_prompt(review.text);
  const std::string hash = prompt_sha256(prompt);

  const bool use_cache =
      !config.cache_dir.empty() && config.kind == BackendKind::kRemoteLlm;
  std::optional<ResponseCache> cache;
  if (use_cache) cache.emplace(config.cache_dir);

  std::string raw;
  if (use_cache) {
    if (auto hit = cache->lookup(config.model_name, review.review_id, hash)) {
      raw = std::move(*hit);
      outcome.cache_hit = true;
    }
  }
  if (!outcome.cache_hit) {
    FetchResult fetched = backend.fetch(review.review_id, prompt);
    outcome.retries_used = fetched.retries_used;
    outcome.cache_hit = fetched.cache_hit;
    if (!fetched.ok) {
      outcome.failure_reason = fetched.error.empty() ? "backend error" : fetched.error;
      return outcome;
    }
    // Persist before parsing so a crash or reject never loses the response.
    if (use_cache)
      cache->store(config.model_name, review.review_id, hash, fetched.raw);
    raw = std::move(fetched.raw);
  }

  ParseResult parsed = parse_llm_response(raw);
  outcome.fence_stripped = parsed.fence_stripped;
  if (!parsed.accepted()) {
    outcome.failure_reason = "unparseable response: " + parsed.detail;
    return outcome;
  }
  parsed.value->review_id = review.review_id;
  outcome.result = std::move(parsed.value);
  return outcome;
}

BatchResult classify_batch(const corpus::ReviewSet& reviews, Backend& backend,
                           const BackendConfig& config) {
  config.validate();
  BatchResult batch;
  batch.stats.n_total = static_cast<long>(reviews.items.size());
  if (reviews.items.empty()) return batch;

  for (const auto& r : reviews.items)
    if (!r.has_text())
      throw PipelineError("classify", "review " + r.review_id + " has no text");

  batch.prompt_hash_of_first = prompt_sha256(build_prompt(reviews.items.front().text));

  // Each slot is written exactly once; assembly below is by review_id, so
  // the outcome is independent of scheduling.
  std::vector<ClassifyOutcome> outcomes(reviews.items.size());
  std::atomic<std::size_t> next{0};
  const int n_workers =
      std::max(1, std::min<int>(config.concurrency,
                                static_cast<int>(reviews.items.size())));
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= reviews.items.size()) return;
      outcomes[i] = classify(reviews.items[i], backend, config);
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  for (std::size_t i = 0; i < reviews.items.size(); ++i) {
    const auto& outcome = outcomes[i];
    const std::string& review_id = reviews.items[i].review_id;
    batch.stats.n_retries += outcome.retries_used;
    if (outcome.cache_hit)
      ++batch.stats.n_cache_hits;
    else
      ++batch.stats.n_backend_calls;
    if (outcome.fence_stripped) ++batch.stats.n_fence_stripped;
    if (outcome.result) {
      ++batch.stats.n_ok;
      batch.results.emplace(review_id, *outcome.result);
    } else {
      ++batch.stats.n_failed;
      batch.failures.push_back({review_id, outcome.failure_reason});
    }
  }
  std::sort(batch.failures.begin(), batch.failures.end(),
            [](const ClassifyFailure& a, const ClassifyFailure& b) {
              return a.review_id < b.review_id;
            });

  const double failure_ratio =
      static_cast<double>(batch.stats.n_failed) / static_cast<double>(batch.stats.n_total);
  if (failure_ratio > config.failure_abort_ratio) {
    throw PipelineError(
        "classify", "failure rate " + std::to_string(failure_ratio) + " exceeds " +
                        std::to_string(config.failure_abort_ratio) + " (" +
                        std::to_string(batch.stats.n_failed) + "/" +
                        std::to_string(batch.stats.n_total) + " failed)");
  }
  return batch;
}

}  // namespace carescope::absa
