#pragma once

#include <span>
#include <string>
#include <string_view>

#include "absa.hpp"

namespace carescope::absa {

// One cue token. A token maps to exactly one aspect; its weight is +1
// (positive), -1 (negative) or 0 (neutral mention).
struct CueWord {
  std::string_view token;
  Aspect aspect;
  Polarity polarity;
};

// The full cue table. Tokens are lowercase and pairwise distinct; the
// synthetic corpus generator draws its vocabulary from this same table so
// generated texts and lexicon labels agree by construction.
std::span<const CueWord> lexicon_cues();

// Pure function of the text: tokenizes on non-alphanumeric boundaries,
// accumulates cue weights per aspect, and labels each mentioned aspect by
// the sign of its total (ties -> neutral). No cue hits -> none_flag.
AspectSentimentSet lexicon_classify(std::string_view text);

// The same classification rendered as the JSON a remote model would return,
// so the lexicon backend exercises the full parse/validate path.
std::string lexicon_raw_response(std::string_view text);

}  // namespace carescope::absa
