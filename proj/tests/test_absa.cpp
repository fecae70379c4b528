#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <set>

#include <unistd.h>

#include "carescope/absa.hpp"
#include "carescope/backend.hpp"
#include "carescope/lexicon.hpp"
#include "carescope/util.hpp"

using namespace carescope;
using namespace carescope::absa;

namespace {

std::string fixture_path(const char* name) {
  return std::string(TEST_FIXTURE_DIR) + "/" + name;
}

std::string prompt_template() { return read_file(fixture_path("prompt_template.txt")); }

// Single-pass placeholder substitution, mirroring the documented contract.
std::string render_template(const std::string& tmpl, const std::string& review) {
  std::string out = tmpl;
  const auto pos = out.find("{review}");
  REQUIRE(pos != std::string::npos);
  out.replace(pos, std::string("{review}").size(), review);
  return out;
}

corpus::Review make_review(std::string id, std::string text) {
  corpus::Review r;
  r.review_id = std::move(id);
  r.facility_id = "f1";
  r.rating = 4;
  r.text = std::move(text);
  return r;
}

}  // namespace

TEST_CASE("build_prompt concatenation matches the frozen template byte for byte") {
  const std::string review = "great visit";
  const PromptBundle bundle = build_prompt(review);
  CHECK(bundle.concat() == render_template(prompt_template(), review));
  CHECK(bundle.text == "The review content is: great visit\n");
  CHECK(bundle.intro.starts_with("### Sentiment Scoring"));
}

TEST_CASE("build_prompt substitutes braces literally, single pass") {
  const std::string review = "cost { \"x\": 1 } dollars and {review} stays literal";
  const PromptBundle bundle = build_prompt(review);
  CHECK(bundle.text == "The review content is: " + review + "\n");
  CHECK(bundle.concat() == render_template(prompt_template(), review));
}

TEST_CASE("build_prompt rejects empty review text") {
  CHECK_THROWS_AS(build_prompt(""), std::invalid_argument);
}

TEST_CASE("prompt hash is stable for identical input") {
  CHECK(prompt_sha256(build_prompt("abc")) == prompt_sha256(build_prompt("abc")));
  CHECK(prompt_sha256(build_prompt("abc")) != prompt_sha256(build_prompt("abd")));
}

TEST_CASE("the two worked examples in the prompt parse to their expected labels") {
  // The question segment carries the expected outputs; parse them directly.
  const PromptBundle bundle = build_prompt("x");
  const std::string& q = bundle.question;

  auto extract_json = [&](std::size_t from) {
    const auto start = q.find('{', from);
    const auto end = q.find('}', start);
    return q.substr(start, end - start + 1);
  };
  const auto first = q.find("Expected Output:");
  const auto second = q.find("Expected Output:", first + 1);

  const ParseResult example1 = parse_llm_response(extract_json(first));
  REQUIRE(example1.accepted());
  CHECK(example1.value->labels ==
        std::map<Aspect, Polarity>{{Aspect::kInterpersonal, Polarity::kPositive},
                                   {Aspect::kTechnicalQuality, Polarity::kPositive},
                                   {Aspect::kFacilities, Polarity::kPositive}});

  const ParseResult example2 = parse_llm_response(extract_json(second));
  REQUIRE(example2.accepted());
  CHECK(example2.value->labels ==
        std::map<Aspect, Polarity>{{Aspect::kInterpersonal, Polarity::kNegative},
                                   {Aspect::kOperationalEfficiency, Polarity::kNegative},
                                   {Aspect::kFinances, Polarity::kNegative}});
}

TEST_CASE("parse accepts plain objects with exact aspect keys") {
  const ParseResult r = parse_llm_response(R"({"Finances": "negative"})");
  REQUIRE(r.accepted());
  CHECK(r.value->labels == std::map<Aspect, Polarity>{{Aspect::kFinances, Polarity::kNegative}});
  CHECK(!r.value->none_flag);
  CHECK(!r.fence_stripped);
}

TEST_CASE("parse accepts the exact None response") {
  const ParseResult r = parse_llm_response(R"({"None": "None"})");
  REQUIRE(r.accepted());
  CHECK(r.value->none_flag);
  CHECK(r.value->labels.empty());
}

TEST_CASE("parse strips exactly one markdown fence and flags it") {
  const ParseResult r = parse_llm_response("```json\n{\"Finances\":\"neutral\"}\n```");
  REQUIRE(r.accepted());
  CHECK(r.fence_stripped);
  CHECK(r.value->labels == std::map<Aspect, Polarity>{{Aspect::kFinances, Polarity::kNeutral}});

  const ParseResult bare = parse_llm_response("```\n{\"Finances\":\"neutral\"}\n```");
  REQUIRE(bare.accepted());
  CHECK(bare.fence_stripped);

  // A fence inside a fence is not stripped twice.
  const ParseResult nested =
      parse_llm_response("```json\n```json\n{\"Finances\":\"neutral\"}\n```\n```");
  CHECK(!nested.accepted());
}

TEST_CASE("parse rejects unknown aspects, bad values, prose, and double JSON") {
  CHECK(parse_llm_response(R"({"Parking": "positive"})").reject == ParseReject::kUnknownKey);
  CHECK(parse_llm_response(R"({"finances": "negative"})").reject ==
        ParseReject::kUnknownKey);  // case matters
  CHECK(parse_llm_response(R"({"Finances": "meh"})").reject == ParseReject::kBadValue);
  CHECK(parse_llm_response(R"({"Finances": "Negative"})").reject == ParseReject::kBadValue);
  CHECK(parse_llm_response(R"({"Finances": 1})").reject == ParseReject::kBadValue);
  CHECK(parse_llm_response(R"({"None": "none"})").reject == ParseReject::kBadNone);
  CHECK(parse_llm_response(R"({"None": "None", "Finances": "negative"})").reject ==
        ParseReject::kUnknownKey);
  CHECK(parse_llm_response("The review is positive overall.").reject ==
        ParseReject::kNotJson);
  CHECK(parse_llm_response(R"({"Finances":"negative"} {"Finances":"negative"})").reject ==
        ParseReject::kNotJson);
  CHECK(parse_llm_response(R"(["Finances"])").reject == ParseReject::kNotObject);
  CHECK(parse_llm_response("").reject == ParseReject::kNotJson);
  CHECK(parse_llm_response("Sure! Here is the JSON: {\"Finances\":\"negative\"}").reject ==
        ParseReject::kNotJson);
}

TEST_CASE("round trip: serialize(parse(x)) is the canonical form of x") {
  const std::vector<std::string> accepted = {
      R"({"Finances": "negative"})",
      R"({"Interpersonal Factors": "positive", "Technical Quality": "neutral"})",
      R"({"None": "None"})",
      R"({"Facilities/Availability": "positive", "Finances": "negative"})",
      R"({"Technical Quality":"neutral","Interpersonal Factors":"positive"})",
  };
  for (const auto& raw : accepted) {
    const ParseResult first = parse_llm_response(raw);
    REQUIRE(first.accepted());
    const std::string canonical = serialize_labels(*first.value);
    const ParseResult second = parse_llm_response(canonical);
    REQUIRE(second.accepted());
    CHECK(serialize_labels(*second.value) == canonical);
    CHECK(second.value->labels == first.value->labels);
    CHECK(second.value->none_flag == first.value->none_flag);
  }
}

TEST_CASE("parse rejects fuzzed unknown keys") {
  std::mt19937_64 rng(31337);
  const std::vector<std::string> known(
      {"Interpersonal Factors", "Technical Quality", "Operational Efficiency", "Finances",
       "Facilities/Availability"});
  for (int i = 0; i < 200; ++i) {
    std::string key;
    std::uniform_int_distribution<int> len(1, 24);
    std::uniform_int_distribution<int> ch(32, 126);
    const int k = len(rng);
    for (int j = 0; j < k; ++j) {
      char c = static_cast<char>(ch(rng));
      if (c == '"' || c == '\\') c = 'x';
      key += c;
    }
    if (std::find(known.begin(), known.end(), key) != known.end()) continue;
    const ParseResult r = parse_llm_response("{\"" + key + "\": \"positive\"}");
    CHECK(!r.accepted());
  }
}

TEST_CASE("polarity_to_score is an order-preserving bijection onto -1/0/+1") {
  CHECK(polarity_to_score(Polarity::kPositive) == 1.0);
  CHECK(polarity_to_score(Polarity::kNeutral) == 0.0);
  CHECK(polarity_to_score(Polarity::kNegative) == -1.0);
  CHECK(polarity_to_score(Polarity::kNegative) < polarity_to_score(Polarity::kNeutral));
  CHECK(polarity_to_score(Polarity::kNeutral) < polarity_to_score(Polarity::kPositive));
  std::set<double> image = {polarity_to_score(Polarity::kPositive),
                            polarity_to_score(Polarity::kNeutral),
                            polarity_to_score(Polarity::kNegative)};
  CHECK(image.size() == 3);
}

TEST_CASE("lexicon is a pure function of the text") {
  const std::string text = "Staff came across as friendly but the wait dragged.";
  const AspectSentimentSet a = lexicon_classify(text);
  const AspectSentimentSet b = lexicon_classify(text);
  CHECK(a == b);
  CHECK(a.labels.at(Aspect::kInterpersonal) == Polarity::kPositive);
  CHECK(a.labels.at(Aspect::kOperationalEfficiency) == Polarity::kNegative);
}

TEST_CASE("lexicon returns the none flag for texts without cues") {
  const AspectSentimentSet r = lexicon_classify("asdf qwerty");
  CHECK(r.none_flag);
  CHECK(r.labels.empty());
  CHECK(lexicon_raw_response("asdf qwerty") == R"({"None": "None"})");
}

TEST_CASE("lexicon cue table is disjoint and lowercase") {
  std::set<std::string_view> seen;
  for (const CueWord& cue : lexicon_cues()) {
    CHECK(seen.insert(cue.token).second);
    for (char c : cue.token) CHECK((std::islower(static_cast<unsigned char>(c)) ||
                                    std::isdigit(static_cast<unsigned char>(c))));
  }
}

TEST_CASE("lexicon balances opposing cues to neutral") {
  const AspectSentimentSet r = lexicon_classify("friendly staff but a rude billing clerk");
  CHECK(r.labels.at(Aspect::kInterpersonal) == Polarity::kNeutral);  // +1 -1
  CHECK(r.labels.at(Aspect::kFinances) == Polarity::kNegative);
}

TEST_CASE("classify via the lexicon backend parses its own canonical output") {
  BackendConfig config;
  config.kind = BackendKind::kLexicon;
  auto backend = make_backend(config);
  const auto review = make_review("r1", "The clinic was clean and the staff friendly.");
  const ClassifyOutcome outcome = classify(review, *backend, config);
  REQUIRE(outcome.result.has_value());
  CHECK(outcome.result->review_id == "r1");
  CHECK(outcome.result->labels.at(Aspect::kFacilities) == Polarity::kPositive);
  CHECK(outcome.result->labels.at(Aspect::kInterpersonal) == Polarity::kPositive);
}

TEST_CASE("classify_batch is invariant under permutation and concurrency") {
  corpus::ReviewSet reviews;
  std::mt19937_64 rng(17);
  const std::vector<std::string> texts = {
      "Staff came across as friendly during our visit.",
      "The wait dragged past an hour.",
      "The restroom was dirty when we arrived.",
      "We were overcharged for a basic visit.",
      "Results were accurate on the first pass.",
      "asdf qwerty",
  };
  for (int i = 0; i < 60; ++i) {
    reviews.items.push_back(
        make_review("rev" + std::to_string(i), texts[i % texts.size()]));
  }

  BackendConfig config;
  config.kind = BackendKind::kLexicon;
  auto backend = make_backend(config);
  const BatchResult base = classify_batch(reviews, *backend, config);

  corpus::ReviewSet shuffled = reviews;
  std::shuffle(shuffled.items.begin(), shuffled.items.end(), rng);
  const BatchResult permuted = classify_batch(shuffled, *backend, config);
  CHECK(base.results == permuted.results);

  BackendConfig parallel = config;
  parallel.concurrency = 8;
  auto backend2 = make_backend(parallel);
  const BatchResult concurrent = classify_batch(reviews, *backend2, parallel);
  CHECK(base.results == concurrent.results);
}

TEST_CASE("classify_batch retries transient transport failures") {
  corpus::ReviewSet reviews;
  for (int i = 0; i < 100; ++i)
    reviews.items.push_back(make_review("rev" + std::to_string(i),
                                        "Staff came across as friendly during our visit."));

  BackendConfig config;
  config.kind = BackendKind::kRemoteLlm;  // exercised through the hook
  config.max_retries = 2;
  config.backoff_initial_ms = 1;
  config.rate_limit_rps = 1e6;

  std::set<std::string> flaky = {"rev13", "rev57"};
  std::mutex mu;
  std::set<std::string> failed_once;
  auto hook = [&](const std::string& review_id) {
    std::lock_guard<std::mutex> lock(mu);
    FetchResult r;
    if (flaky.contains(review_id) && !failed_once.contains(review_id)) {
      failed_once.insert(review_id);
      r.error = "transport: injected";
      return r;
    }
    r.ok = true;
    r.raw = R"({"Interpersonal Factors": "positive"})";
    return r;
  };
  auto backend = make_hooked_backend(config, hook);
  const BatchResult batch = classify_batch(reviews, *backend, config);
  CHECK(batch.results.size() == 100);
  CHECK(batch.stats.n_retries == 2);
  CHECK(batch.stats.n_failed == 0);
}

TEST_CASE("classify_batch aborts above the failure threshold") {
  corpus::ReviewSet reviews;
  for (int i = 0; i < 20; ++i)
    reviews.items.push_back(make_review("rev" + std::to_string(i), "text"));
  BackendConfig config;
  config.kind = BackendKind::kRemoteLlm;
  config.max_retries = 0;
  config.backoff_initial_ms = 1;
  config.failure_abort_ratio = 0.10;
  auto hook = [&](const std::string& review_id) {
    FetchResult r;
    if (review_id < "rev15") {  // rev0..rev14: 15 failures of 20
      r.error = "transport: down";
      return r;
    }
    r.ok = true;
    r.raw = R"({"None": "None"})";
    return r;
  };
  auto backend = make_hooked_backend(config, hook);
  CHECK_THROWS_AS(classify_batch(reviews, *backend, config), PipelineError);
}

TEST_CASE("unparseable responses become counted failures, not crashes") {
  corpus::ReviewSet reviews;
  reviews.items.push_back(make_review("rev0", "text"));
  reviews.items.push_back(make_review("rev1", "text"));
  reviews.items.push_back(make_review("rev2", "text"));
  reviews.items.push_back(make_review("rev3", "text"));
  reviews.items.push_back(make_review("rev4", "text"));
  reviews.items.push_back(make_review("rev5", "text"));
  reviews.items.push_back(make_review("rev6", "text"));
  reviews.items.push_back(make_review("rev7", "text"));
  reviews.items.push_back(make_review("rev8", "text"));
  reviews.items.push_back(make_review("rev9", "text"));

  BackendConfig config;
  config.kind = BackendKind::kRemoteLlm;
  config.max_retries = 0;
  config.backoff_initial_ms = 1;
  auto hook = [&](const std::string& review_id) {
    FetchResult r;
    r.ok = true;
    r.raw = review_id == "rev3" ? "I made up a new aspect: {\"Parking\": \"positive\"}"
                                : R"({"Finances": "negative"})";
    return r;
  };
  auto backend = make_hooked_backend(config, hook);
  const BatchResult batch = classify_batch(reviews, *backend, config);
  CHECK(batch.results.size() == 9);
  CHECK(batch.stats.n_failed == 1);
  REQUIRE(batch.failures.size() == 1);
  CHECK(batch.failures[0].review_id == "rev3");
}

TEST_CASE("response cache round trip and the replay backend") {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("carescope_cache_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  ResponseCache cache(dir);
  cache.store("model-x", "rev1", "hash1", R"({"Finances": "negative"})");
  auto hit = cache.lookup("model-x", "rev1", "hash1");
  REQUIRE(hit.has_value());
  CHECK(*hit == R"({"Finances": "negative"})");
  CHECK(!cache.lookup("model-x", "rev2", "hash1").has_value());
  CHECK(!cache.lookup("model-y", "rev1", "hash1").has_value());

  // Replay backend answers strictly from the cache.
  BackendConfig config;
  config.kind = BackendKind::kReplayCache;
  config.model_name = "model-x";
  config.cache_dir = dir;
  auto backend = make_backend(config);

  const auto review = make_review("rev1", "whatever text");
  const std::string hash = prompt_sha256(build_prompt(review.text));
  cache.store("model-x", "rev1", hash, R"({"Finances": "negative"})");
  const ClassifyOutcome outcome = classify(review, *backend, config);
  REQUIRE(outcome.result.has_value());
  CHECK(outcome.result->labels.at(Aspect::kFinances) == Polarity::kNegative);

  const auto miss = classify(make_review("rev9", "no cache entry"), *backend, config);
  CHECK(!miss.result.has_value());
  std::filesystem::remove_all(dir);
}

TEST_CASE("cache hits skip backend calls entirely") {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("carescope_cache_hits_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);

  BackendConfig config;
  config.kind = BackendKind::kRemoteLlm;
  config.cache_dir = dir;
  config.max_retries = 0;
  config.backoff_initial_ms = 1;

  corpus::ReviewSet reviews;
  for (int i = 0; i < 3; ++i)
    reviews.items.push_back(make_review("rev" + std::to_string(i), "cached text"));

  ResponseCache cache(dir);
  for (const auto& r : reviews.items)
    cache.store(config.model_name, r.review_id, prompt_sha256(build_prompt(r.text)),
                R"({"Finances": "negative"})");

  long hook_calls = 0;
  auto hook = [&](const std::string&) {
    ++hook_calls;
    FetchResult r;
    r.ok = true;
    r.raw = R"({"None": "None"})";
    return r;
  };
  auto backend = make_hooked_backend(config, hook);
  const BatchResult batch = classify_batch(reviews, *backend, config);
  CHECK(batch.results.size() == 3);
  CHECK(batch.stats.n_cache_hits == 3);
  CHECK(hook_calls == 0);
  std::filesystem::remove_all(dir);
}
