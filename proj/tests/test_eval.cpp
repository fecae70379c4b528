#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "carescope/eval.hpp"
#include "carescope/stats.hpp"
#include "carescope/util.hpp"

using namespace carescope;
using namespace carescope::eval;

namespace {

AnnotationRecord rec(std::string review, int annotator,
                     std::map<Aspect, Polarity> labels) {
  AnnotationRecord r;
  r.review_id = std::move(review);
  r.annotator_id = annotator;
  r.labels = std::move(labels);
  return r;
}

}  // namespace

TEST_CASE("majority vote: strict majority wins") {
  const std::vector<AnnotationRecord> records = {
      rec("r1", 1, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 2, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 3, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 4, {{Aspect::kFinances, Polarity::kNegative}}),
  };
  const ReviewVote vote = majority_vote_review(records);
  CHECK(vote.gold.at(Aspect::kFinances) == Polarity::kPositive);
  CHECK(vote.unresolved.empty());
}

TEST_CASE("majority vote: 2-2 ties are unresolved") {
  const std::vector<AnnotationRecord> records = {
      rec("r1", 1, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 2, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 3, {{Aspect::kFinances, Polarity::kNegative}}),
      rec("r1", 4, {{Aspect::kFinances, Polarity::kNegative}}),
  };
  const ReviewVote vote = majority_vote_review(records);
  CHECK(!vote.gold.contains(Aspect::kFinances));
  CHECK(vote.unresolved.contains(Aspect::kFinances));
}

TEST_CASE("majority vote: absence outvotes a single mention") {
  const std::vector<AnnotationRecord> records = {
      rec("r1", 1, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 2, {}),
      rec("r1", 3, {}),
      rec("r1", 4, {}),
  };
  const ReviewVote vote = majority_vote_review(records);
  CHECK(vote.gold.empty());
  CHECK(vote.unresolved.empty());  // excluded, not a tie
}

TEST_CASE("majority vote: unique plurality wins without a strict majority") {
  const std::vector<AnnotationRecord> records = {
      rec("r1", 1, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 2, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 3, {{Aspect::kFinances, Polarity::kNegative}}),
      rec("r1", 4, {}),
  };
  // positive 2, negative 1, not-mentioned 1: positive is the unique max.
  const ReviewVote vote = majority_vote_review(records);
  CHECK(vote.gold.at(Aspect::kFinances) == Polarity::kPositive);
}

TEST_CASE("majority vote is invariant under annotator record order") {
  std::vector<AnnotationRecord> records = {
      rec("r1", 1,
          {{Aspect::kFinances, Polarity::kPositive},
           {Aspect::kInterpersonal, Polarity::kNegative}}),
      rec("r1", 2, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 3, {{Aspect::kInterpersonal, Polarity::kNegative}}),
      rec("r1", 4, {{Aspect::kFinances, Polarity::kNeutral}}),
  };
  const GoldSet base = majority_vote(records);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 8; ++i) {
    std::shuffle(records.begin(), records.end(), rng);
    const GoldSet shuffled = majority_vote(records);
    CHECK(shuffled.entries == base.entries);
    CHECK(shuffled.unresolved == base.unresolved);
  }
}

TEST_CASE("majority vote rejects duplicate annotator records") {
  const std::vector<AnnotationRecord> records = {
      rec("r1", 1, {{Aspect::kFinances, Polarity::kPositive}}),
      rec("r1", 1, {{Aspect::kFinances, Polarity::kNegative}}),
  };
  CHECK_THROWS_AS(majority_vote(records), PipelineError);
}

TEST_CASE("flatten pairs gold entries with predictions or absent") {
  GoldSet gold;
  gold.entries[{"r1", Aspect::kFinances}] = Polarity::kNegative;
  gold.entries[{"r2", Aspect::kFinances}] = Polarity::kNegative;

  std::map<std::string, AspectSentimentSet> predictions;
  AspectSentimentSet p1;
  p1.review_id = "r1";
  p1.labels[Aspect::kFinances] = Polarity::kNegative;
  predictions["r1"] = p1;
  AspectSentimentSet p2;
  p2.review_id = "r2";
  p2.none_flag = true;
  predictions["r2"] = p2;

  const auto rows = flatten(gold, predictions);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].predicted == Polarity::kNegative);
  CHECK(!rows[1].predicted.has_value());
}

TEST_CASE("flatten reports missing prediction records by review id") {
  GoldSet gold;
  gold.entries[{"r1", Aspect::kFinances}] = Polarity::kNegative;
  gold.entries[{"r9", Aspect::kFinances}] = Polarity::kPositive;
  std::map<std::string, AspectSentimentSet> predictions;
  AspectSentimentSet p1;
  p1.review_id = "r1";
  predictions["r1"] = p1;
  try {
    flatten(gold, predictions);
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(std::string(e.what()).find("r9") != std::string::npos);
  }
}

TEST_CASE("score reproduces the hand-computed confusion fixture") {
  // gold positive x10: predicted positive x8, negative x2;
  // gold negative x5: predicted negative x5.
  std::vector<FlatRow> rows;
  auto add = [&](int count, Polarity gold, std::optional<Polarity> pred) {
    for (int i = 0; i < count; ++i) {
      FlatRow row;
      row.review_id = "r" + std::to_string(rows.size());
      row.aspect = Aspect::kFinances;
      row.gold = gold;
      row.predicted = pred;
      rows.push_back(row);
    }
  };
  add(8, Polarity::kPositive, Polarity::kPositive);
  add(2, Polarity::kPositive, Polarity::kNegative);
  add(5, Polarity::kNegative, Polarity::kNegative);

  const EvalReport report = score(rows);
  const ClassMetrics& pos = report.per_class.at(Polarity::kPositive);
  CHECK(pos.precision == doctest::Approx(1.0));
  CHECK(pos.recall == doctest::Approx(0.8));
  CHECK(pos.f1 == doctest::Approx(0.888888888889).epsilon(1e-3));
  CHECK(report.accuracy == doctest::Approx(13.0 / 15.0));
  const ClassMetrics& neg = report.per_class.at(Polarity::kNegative);
  CHECK(neg.precision == doctest::Approx(5.0 / 7.0));
  CHECK(neg.recall == doctest::Approx(1.0));
  const ClassMetrics& neu = report.per_class.at(Polarity::kNeutral);
  CHECK(neu.support == 0);
  CHECK(!neu.recall_defined);
  CHECK(report.macro_classes == 2);  // neutral excluded for zero support
}

TEST_CASE("score counts absent predictions as misses, never true positives") {
  std::vector<FlatRow> rows(4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].review_id = "r" + std::to_string(i);
    rows[i].aspect = Aspect::kFinances;
    rows[i].gold = Polarity::kPositive;
    rows[i].predicted = i < 1 ? std::optional<Polarity>(Polarity::kPositive)
                              : std::nullopt;
  }
  const EvalReport report = score(rows);
  const ClassMetrics& pos = report.per_class.at(Polarity::kPositive);
  CHECK(pos.recall == doctest::Approx(0.25));
  CHECK(pos.precision == doctest::Approx(1.0));
  CHECK(report.accuracy == doctest::Approx(0.25));
  CHECK(report.confusion[3][0] == 3);  // absent-prediction row, gold positive
}

TEST_CASE("score rejects empty input") {
  CHECK_THROWS_AS(score({}), stats::StatsError);
}

TEST_CASE("micro accuracy equals confusion trace over total on random fixtures") {
  std::mt19937_64 rng(2718);
  for (int rep = 0; rep < 30; ++rep) {
    std::uniform_int_distribution<int> n_rows(1, 200);
    std::uniform_int_distribution<int> cls(0, 2);
    std::uniform_int_distribution<int> pred(0, 3);
    static constexpr std::array<Polarity, 3> kP = {Polarity::kPositive,
                                                   Polarity::kNeutral,
                                                   Polarity::kNegative};
    std::vector<FlatRow> rows(n_rows(rng));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      rows[i].review_id = "r" + std::to_string(i);
      rows[i].aspect = Aspect::kTechnicalQuality;
      rows[i].gold = kP[cls(rng)];
      const int p = pred(rng);
      rows[i].predicted = p < 3 ? std::optional<Polarity>(kP[p]) : std::nullopt;
    }
    const EvalReport report = score(rows);
    long trace = 0, total = 0;
    for (int i = 0; i < 3; ++i) trace += report.confusion[i][i];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j) total += report.confusion[i][j];
    CHECK(total == static_cast<long>(rows.size()));
    CHECK(report.accuracy ==
          doctest::Approx(static_cast<double>(trace) / total).epsilon(1e-12));

    long support_sum = 0;
    for (const auto& [_, m] : report.per_class) support_sum += m.support;
    CHECK(support_sum == total);

    for (const auto& [_, m] : report.per_class) {
      if (m.support == 0) continue;
      CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-12);
      CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-12);
    }

    // Row order never matters.
    std::vector<FlatRow> shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const EvalReport again = score(shuffled);
    CHECK(again.accuracy == report.accuracy);
    CHECK(again.confusion == report.confusion);
  }
}

TEST_CASE("annotation CSV loads into grouped records") {
  const auto path = std::filesystem::temp_directory_path() / "carescope_ann.csv";
  write_file_atomic(path,
                    "review_id,annotator_id,aspect,polarity\n"
                    "r1,1,Finances,negative\n"
                    "r1,1,Interpersonal Factors,positive\n"
                    "r1,2,Finances,negative\n"
                    "r2,1,Technical Quality,neutral\n");
  const auto records = load_annotations_csv(path);
  CHECK(records.size() == 3);  // (r1,1), (r1,2), (r2,1)
  const GoldSet gold = majority_vote(records);
  CHECK(gold.entries.at({"r1", Aspect::kFinances}) == Polarity::kNegative);
  std::filesystem::remove(path);
}

TEST_CASE("annotation CSV rejects unknown aspects and missing columns") {
  const auto path = std::filesystem::temp_directory_path() / "carescope_ann_bad.csv";
  write_file_atomic(path, "review_id,annotator_id,aspect,polarity\nr1,1,Parking,positive\n");
  CHECK_THROWS_AS(load_annotations_csv(path), PipelineError);
  write_file_atomic(path, "review_id,annotator_id,aspect\nr1,1,Finances\n");
  CHECK_THROWS_AS(load_annotations_csv(path), PipelineError);
  std::filesystem::remove(path);
}
