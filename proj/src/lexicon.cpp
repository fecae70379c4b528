#include "carescope/lexicon.hpp"

#include <array>
#include <cctype>
#include <map>

namespace carescope::absa {

namespace {

using enum Aspect;
using enum Polarity;

constexpr std::array kCues = {
    // Interpersonal Factors
    CueWord{"friendly", kInterpersonal, kPositive},
    CueWord{"kind", kInterpersonal, kPositive},
    CueWord{"caring", kInterpersonal, kPositive},
    CueWord{"courteous", kInterpersonal, kPositive},
    CueWord{"compassionate", kInterpersonal, kPositive},
    CueWord{"respectful", kInterpersonal, kPositive},
    CueWord{"rude", kInterpersonal, kNegative},
    CueWord{"dismissive", kInterpersonal, kNegative},
    CueWord{"disrespectful", kInterpersonal, kNegative},
    CueWord{"condescending", kInterpersonal, kNegative},
    CueWord{"impatient", kInterpersonal, kNegative},
    CueWord{"demeanor", kInterpersonal, kNeutral},
    // Technical Quality
    CueWord{"thorough", kTechnicalQuality, kPositive},
    CueWord{"knowledgeable", kTechnicalQuality, kPositive},
    CueWord{"accurate", kTechnicalQuality, kPositive},
    CueWord{"skilled", kTechnicalQuality, kPositive},
    CueWord{"competent", kTechnicalQuality, kPositive},
    CueWord{"misdiagnosed", kTechnicalQuality, kNegative},
    CueWord{"incompetent", kTechnicalQuality, kNegative},
    CueWord{"sloppy", kTechnicalQuality, kNegative},
    CueWord{"careless", kTechnicalQuality, kNegative},
    CueWord{"botched", kTechnicalQuality, kNegative},
    CueWord{"diagnosis", kTechnicalQuality, kNeutral},
    // Operational Efficiency
    CueWord{"quick", kOperationalEfficiency, kPositive},
    CueWord{"fast", kOperationalEfficiency, kPositive},
    CueWord{"efficient", kOperationalEfficiency, kPositive},
    CueWord{"prompt", kOperationalEfficiency, kPositive},
    CueWord{"speedy", kOperationalEfficiency, kPositive},
    CueWord{"slow", kOperationalEfficiency, kNegative},
    CueWord{"wait", kOperationalEfficiency, kNegative},
    CueWord{"crowded", kOperationalEfficiency, kNegative},
    CueWord{"disorganized", kOperationalEfficiency, kNegative},
    CueWord{"delayed", kOperationalEfficiency, kNegative},
    CueWord{"scheduling", kOperationalEfficiency, kNeutral},
    // Finances
    CueWord{"affordable", kFinances, kPositive},
    CueWord{"reasonable", kFinances, kPositive},
    CueWord{"transparent", kFinances, kPositive},
    CueWord{"inexpensive", kFinances, kPositive},
    CueWord{"overcharged", kFinances, kNegative},
    CueWord{"expensive", kFinances, kNegative},
    CueWord{"overpriced", kFinances, kNegative},
    CueWord{"billing", kFinances, kNegative},
    CueWord{"copay", kFinances, kNeutral},
    // Facilities/Availability
    CueWord{"clean", kFacilities, kPositive},
    CueWord{"modern", kFacilities, kPositive},
    CueWord{"spacious", kFacilities, kPositive},
    CueWord{"comfortable", kFacilities, kPositive},
    CueWord{"immaculate", kFacilities, kPositive},
    CueWord{"dirty", kFacilities, kNegative},
    CueWord{"outdated", kFacilities, kNegative},
    CueWord{"cramped", kFacilities, kNegative},
    CueWord{"rundown", kFacilities, kNegative},
    CueWord{"broken", kFacilities, kNegative},
    CueWord{"parking", kFacilities, kNeutral},
};

const std::map<std::string_view, const CueWord*>& cue_index() {
  static const auto* index = [] {
    auto* m = new std::map<std::string_view, const CueWord*>();
    for (const auto& cue : kCues) (*m)[cue.token] = &cue;
    return m;
  }();
  return *index;
}

}  // namespace

std::span<const CueWord> lexicon_cues() { return kCues; }

AspectSentimentSet lexicon_classify(std::string_view text) {
  std::map<Aspect, int> score;
  std::map<Aspect, bool> mentioned;

  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    auto it = cue_index().find(token);
    if (it != cue_index().end()) {
      const CueWord& cue = *it->second;
      mentioned[cue.aspect] = true;
      score[cue.aspect] += static_cast<int>(cue.polarity);
    }
    token.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else
      flush();
  }
  flush();

  AspectSentimentSet out;
  for (const auto& [aspect, hit] : mentioned) {
    if (!hit) continue;
    const int s = score[aspect];
    out.labels[aspect] = s > 0   ? Polarity::kPositive
                         : s < 0 ? Polarity::kNegative
                                 : Polarity::kNeutral;
  }
  out.none_flag = out.labels.empty();
  return out;
}

std::string lexicon_raw_response(std::string_view text) {
  return serialize_labels(lexicon_classify(text));
}

}  // namespace carescope::absa
