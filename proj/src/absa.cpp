#include "carescope/absa.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <stdexcept>

#include "carescope/prompt_text.hpp"
#include "carescope/util.hpp"

namespace carescope::absa {

std::string_view aspect_name(Aspect a) {
  switch (a) {
    case Aspect::kInterpersonal: return "Interpersonal Factors";
    case Aspect::kTechnicalQuality: return "Technical Quality";
    case Aspect::kOperationalEfficiency: return "Operational Efficiency";
    case Aspect::kFinances: return "Finances";
    case Aspect::kFacilities: return "Facilities/Availability";
  }
  throw std::logic_error("unreachable aspect");
}

std::optional<Aspect> aspect_from_name(std::string_view name) {
  for (Aspect a : kAllAspects)
    if (aspect_name(a) == name) return a;
  return std::nullopt;
}

std::string_view polarity_name(Polarity p) {
  switch (p) {
    case Polarity::kPositive: return "positive";
    case Polarity::kNeutral: return "neutral";
    case Polarity::kNegative: return "negative";
  }
  throw std::logic_error("unreachable polarity");
}

std::optional<Polarity> polarity_from_name(std::string_view name) {
  if (name == "positive") return Polarity::kPositive;
  if (name == "neutral") return Polarity::kNeutral;
  if (name == "negative") return Polarity::kNegative;
  return std::nullopt;
}

double polarity_to_score(Polarity p) { return static_cast<double>(static_cast<int>(p)); }

std::string serialize_labels(const AspectSentimentSet& s) {
  if (s.none_flag || s.labels.empty()) return R"({"None": "None"})";
  std::string out = "{";
  bool first = true;
  for (Aspect a : kAllAspects) {
    auto it = s.labels.find(a);
    if (it == s.labels.end()) continue;
    if (!first) out += ", ";
    first = false;
    out += '"';
    out += aspect_name(a);
    out += R"(": ")";
    out += polarity_name(it->second);
    out += '"';
  }
  out += "}";
  return out;
}

std::string PromptBundle::concat() const { return intro + question + text + output; }

PromptBundle build_prompt(std::string_view review_text) {
  if (review_text.empty())
    throw std::invalid_argument("build_prompt: review text must be non-empty");
  PromptBundle bundle;
  bundle.intro = prompt_text::kIntro;
  bundle.question = prompt_text::kQuestion;
  std::string text(prompt_text::kTextTemplate);
  const auto pos = text.find(prompt_text::kReviewPlaceholder);
  text.replace(pos, prompt_text::kReviewPlaceholder.size(), review_text);
  bundle.text = std::move(text);
  bundle.output = prompt_text::kOutput;
  return bundle;
}

std::string prompt_sha256(const PromptBundle& bundle) { return sha256_hex(bundle.concat()); }

namespace {

// Strips exactly one Markdown code fence (``` or ```lang) if the trimmed
// payload both starts and ends with one.
std::optional<std::string_view> strip_one_fence(std::string_view s) {
  if (s.size() < 6 || s.substr(0, 3) != "```") return std::nullopt;
  std::size_t body_start = 3;
  while (body_start < s.size() && s[body_start] != '\n') {
    // Language tag: letters only; anything else is not a fence header.
    if (!std::isalpha(static_cast<unsigned char>(s[body_start]))) return std::nullopt;
    ++body_start;
  }
  if (body_start >= s.size()) return std::nullopt;
  ++body_start;  // past the newline
  if (s.size() < body_start + 3) return std::nullopt;
  if (s.substr(s.size() - 3) != "```") return std::nullopt;
  std::string_view body = s.substr(body_start, s.size() - 3 - body_start);
  return trim(body);
}

ParseResult reject(ParseReject why, std::string detail, bool fence_stripped) {
  ParseResult r;
  r.reject = why;
  r.detail = std::move(detail);
  r.fence_stripped = fence_stripped;
  return r;
}

}  // namespace

ParseResult parse_llm_response(std::string_view raw) {
  std::string_view payload = trim(raw);
  bool fence_stripped = false;
  if (auto inner = strip_one_fence(payload)) {
    payload = *inner;
    fence_stripped = true;
  }
  if (payload.empty()) return reject(ParseReject::kNotJson, "empty response", fence_stripped);

  nlohmann::json doc;
  try {
    // parse() rejects trailing content, so "two objects" or prose after the
    // JSON fails here rather than being silently ignored.
    doc = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::parse_error& e) {
    return reject(ParseReject::kNotJson, e.what(), fence_stripped);
  }
  if (!doc.is_object())
    return reject(ParseReject::kNotObject, doc.type_name(), fence_stripped);

  AspectSentimentSet out;
  for (const auto& [key, value] : doc.items()) {
    if (key == "None") {
      if (!(value.is_string() && value.get<std::string>() == "None"))
        return reject(ParseReject::kBadNone, key, fence_stripped);
      if (doc.size() != 1)
        return reject(ParseReject::kUnknownKey, "None mixed with aspects", fence_stripped);
      out.none_flag = true;
      ParseResult r;
      r.value = std::move(out);
      r.fence_stripped = fence_stripped;
      return r;
    }
    const auto aspect = aspect_from_name(key);
    if (!aspect) return reject(ParseReject::kUnknownKey, key, fence_stripped);
    if (!value.is_string())
      return reject(ParseReject::kBadValue, key, fence_stripped);
    const auto polarity = polarity_from_name(value.get<std::string>());
    if (!polarity)
      return reject(ParseReject::kBadValue, value.get<std::string>(), fence_stripped);
    out.labels[*aspect] = *polarity;
  }
  // An empty object carries the same information as {"None":"None"}.
  if (out.labels.empty()) out.none_flag = true;
  ParseResult r;
  r.value = std::move(out);
  r.fence_stripped = fence_stripped;
  return r;
}

}  // namespace carescope::absa
