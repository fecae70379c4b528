#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "absa.hpp"

namespace carescope::eval {

using absa::Aspect;
using absa::AspectSentimentSet;
using absa::Polarity;

struct AnnotationRecord {
  std::string review_id;
  int annotator_id = 0;
  std::map<Aspect, Polarity> labels;
};

struct GoldKey {
  std::string review_id;
  Aspect aspect;
  auto operator<=>(const GoldKey&) const = default;
};

struct GoldSet {
  std::map<GoldKey, Polarity> entries;
  std::set<GoldKey> unresolved;  // voting ties, excluded from entries
};

// Majority vote for one review. An annotator who labeled the review but not
// a given aspect casts an implicit "not mentioned" vote for it. The unique
// plurality option wins; a winning "not mentioned" excludes the aspect; a
// tie for first place lands in unresolved.
struct ReviewVote {
  std::map<Aspect, Polarity> gold;
  std::set<Aspect> unresolved;
};
ReviewVote majority_vote_review(const std::vector<AnnotationRecord>& records);

// Vote across all reviews; records are grouped by review_id first, so the
// result is invariant under record order.
GoldSet majority_vote(const std::vector<AnnotationRecord>& records);

struct FlatRow {
  std::string review_id;
  Aspect aspect;
  Polarity gold;
  std::optional<Polarity> predicted;  // nullopt = aspect absent from prediction
};

// One row per gold entry. Throws PipelineError listing the review_ids when a
// gold review has no prediction record at all.
std::vector<FlatRow> flatten(const GoldSet& gold,
                             const std::map<std::string, AspectSentimentSet>& predictions);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
  bool precision_defined = true;  // false when TP+FP == 0 (reported as 0)
  bool recall_defined = true;     // false when support == 0
  bool f1_defined = true;
};

struct EvalReport {
  // Indexed by gold/predicted class: positive, neutral, negative.
  static constexpr std::array<Polarity, 3> kClasses = {
      Polarity::kPositive, Polarity::kNeutral, Polarity::kNegative};

  std::map<Polarity, ClassMetrics> per_class;
  double accuracy = 0.0;
  long n_rows = 0;
  // confusion[predicted][gold]; row 3 holds absent predictions.
  std::array<std::array<long, 3>, 4> confusion{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  int macro_classes = 0;  // zero-support classes are excluded from the macro

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Scores flattened rows. An absent prediction counts as a miss (FN) for the
// gold class and never as a true positive. Throws StatsError on empty input.
EvalReport score(const std::vector<FlatRow>& rows);

// CSV with columns review_id,annotator_id,aspect,polarity.
std::vector<AnnotationRecord> load_annotations_csv(const std::filesystem::path& path);

}  // namespace carescope::eval
