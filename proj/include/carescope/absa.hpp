#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace carescope::absa {

enum class Aspect {
  kInterpersonal,
  kTechnicalQuality,
  kOperationalEfficiency,
  kFinances,
  kFacilities,
};

inline constexpr std::array<Aspect, 5> kAllAspects = {
    Aspect::kInterpersonal,   Aspect::kTechnicalQuality,
    Aspect::kOperationalEfficiency, Aspect::kFinances,
    Aspect::kFacilities,
};

// The exact JSON key the backend must use for each aspect.
std::string_view aspect_name(Aspect a);
std::optional<Aspect> aspect_from_name(std::string_view name);

enum class Polarity { kNegative = -1, kNeutral = 0, kPositive = 1 };

std::string_view polarity_name(Polarity p);
std::optional<Polarity> polarity_from_name(std::string_view name);

// Negative -> -1, Neutral -> 0, Positive -> +1.
double polarity_to_score(Polarity p);

struct AspectSentimentSet {
  std::string review_id;
  std::map<Aspect, Polarity> labels;
  // True iff the review mentions none of the defined aspects; implies empty labels.
  bool none_flag = false;

  bool operator==(const AspectSentimentSet&) const = default;
};

// Canonical serialization: aspects in declaration order, or {"None":"None"}.
std::string serialize_labels(const AspectSentimentSet& s);

struct PromptBundle {
  std::string intro;
  std::string question;
  std::string text;
  std::string output;

  // Canonical byte sequence: the four segments concatenated in order.
  std::string concat() const;
};

// Assembles the classification prompt for one review. The review body is
// spliced in with a single-pass substitution; braces in the review stay
// literal. Throws std::invalid_argument on empty input.
PromptBundle build_prompt(std::string_view review_text);

// SHA-256 of the concatenated bundle; cache keys and run manifests use this.
std::string prompt_sha256(const PromptBundle& bundle);

enum class ParseReject {
  kNone,
  kNotJson,          // unparseable, prose, or trailing content
  kNotObject,        // valid JSON but not an object
  kUnknownKey,       // key outside the five aspect names
  kBadValue,         // sentiment value outside positive/negative/neutral
  kBadNone,          // "None" key with a value other than "None"
};

struct ParseResult {
  std::optional<AspectSentimentSet> value;  // engaged iff accepted
  bool fence_stripped = false;              // lenient mode used (counted by callers)
  ParseReject reject = ParseReject::kNone;
  std::string detail;

  bool accepted() const { return value.has_value(); }
};

// Strict validator for backend responses. Accepts a single JSON object whose
// keys are a subset of the five aspect names with positive/negative/neutral
// values, or exactly {"None":"None"}. Tolerates one Markdown code fence
// around the object, flagged in the result. Everything else rejects.
ParseResult parse_llm_response(std::string_view raw);

}  // namespace carescope::absa
