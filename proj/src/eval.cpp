#include "carescope/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "carescope/stats.hpp"
#include "carescope/util.hpp"

namespace carescope::eval {

namespace {

int class_index(Polarity p) {
  switch (p) {
    case Polarity::kPositive: return 0;
    case Polarity::kNeutral: return 1;
    case Polarity::kNegative: return 2;
  }
  throw std::logic_error("unreachable polarity");
}

}  // namespace

ReviewVote majority_vote_review(const std::vector<AnnotationRecord>& records) {
  if (records.empty() || records.size() > 4)
    throw PipelineError("majority_vote", "expected 1-4 annotators per review, got " +
                                             std::to_string(records.size()));
  ReviewVote out;
  std::set<Aspect> mentioned;
  for (const auto& rec : records)
    for (const auto& [aspect, _] : rec.labels) mentioned.insert(aspect);

  for (Aspect aspect : mentioned) {
    // Vote counts: positive, neutral, negative, not-mentioned.
    std::array<int, 4> votes{};
    for (const auto& rec : records) {
      auto it = rec.labels.find(aspect);
      if (it == rec.labels.end())
        ++votes[3];
      else
        ++votes[class_index(it->second)];
    }
    const int best = *std::max_element(votes.begin(), votes.end());
    const int n_best = static_cast<int>(std::count(votes.begin(), votes.end(), best));
    if (n_best > 1) {
      out.unresolved.insert(aspect);
      continue;
    }
    const int winner =
        static_cast<int>(std::find(votes.begin(), votes.end(), best) - votes.begin());
    if (winner == 3) continue;  // "not mentioned" wins: aspect stays out of gold
    static constexpr std::array<Polarity, 3> kByIndex = {
        Polarity::kPositive, Polarity::kNeutral, Polarity::kNegative};
    out.gold[aspect] = kByIndex[winner];
  }
  return out;
}

GoldSet majority_vote(const std::vector<AnnotationRecord>& records) {
  std::map<std::string, std::map<int, AnnotationRecord>> grouped;
  for (const auto& rec : records) {
    auto [it, inserted] = grouped[rec.review_id].emplace(rec.annotator_id, rec);
    if (!inserted)
      throw PipelineError("majority_vote", "duplicate annotation for review " +
                                               rec.review_id + " annotator " +
                                               std::to_string(rec.annotator_id));
  }
  GoldSet gold;
  for (const auto& [review_id, by_annotator] : grouped) {
    std::vector<AnnotationRecord> recs;
    recs.reserve(by_annotator.size());
    for (const auto& [_, rec] : by_annotator) recs.push_back(rec);
    const ReviewVote vote = majority_vote_review(recs);
    for (const auto& [aspect, polarity] : vote.gold)
      gold.entries[{review_id, aspect}] = polarity;
    for (Aspect aspect : vote.unresolved) gold.unresolved.insert({review_id, aspect});
  }
  return gold;
}

std::vector<FlatRow> flatten(
    const GoldSet& gold, const std::map<std::string, AspectSentimentSet>& predictions) {
  std::set<std::string> missing;
  for (const auto& [key, _] : gold.entries)
    if (!predictions.contains(key.review_id)) missing.insert(key.review_id);
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw PipelineError("flatten", "missing prediction records for: " + list);
  }

  std::vector<FlatRow> rows;
  rows.reserve(gold.entries.size());
  for (const auto& [key, polarity] : gold.entries) {
    FlatRow row;
    row.review_id = key.review_id;
    row.aspect = key.aspect;
    row.gold = polarity;
    const AspectSentimentSet& pred = predictions.at(key.review_id);
    if (auto it = pred.labels.find(key.aspect); it != pred.labels.end())
      row.predicted = it->second;
    rows.push_back(std::move(row));
  }
  return rows;
}

EvalReport score(const std::vector<FlatRow>& rows) {
  if (rows.empty()) throw stats::StatsError("score: no rows");
  EvalReport report;
  report.n_rows = static_cast<long>(rows.size());

  for (const auto& row : rows) {
    const int g = class_index(row.gold);
    const int p = row.predicted ? class_index(*row.predicted) : 3;
    ++report.confusion[p][g];
  }

  long exact = 0;
  for (int c = 0; c < 3; ++c) exact += report.confusion[c][c];
  report.accuracy = static_cast<double>(exact) / static_cast<double>(report.n_rows);

  for (int c = 0; c < 3; ++c) {
    ClassMetrics m;
    const long tp = report.confusion[c][c];
    long fp = 0, fn = 0;
    for (int g = 0; g < 3; ++g)
      if (g != c) fp += report.confusion[c][g];
    for (int p = 0; p < 4; ++p)
      if (p != c) fn += report.confusion[p][c];
    m.support = tp + fn;
    if (tp + fp == 0) {
      m.precision = 0.0;
      m.precision_defined = false;
    } else {
      m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (m.support == 0) {
      m.recall = 0.0;
      m.recall_defined = false;
    } else {
      m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
    }
    if (m.precision + m.recall == 0.0) {
      m.f1 = 0.0;
      m.f1_defined = m.precision_defined && m.recall_defined;
    } else {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    report.per_class[EvalReport::kClasses[c]] = m;
  }

  for (const auto& [cls, m] : report.per_class) {
    if (m.support == 0) continue;  // zero-support classes stay out of the macro
    report.macro_precision += m.precision;
    report.macro_recall += m.recall;
    report.macro_f1 += m.f1;
    ++report.macro_classes;
  }
  if (report.macro_classes > 0) {
    report.macro_precision /= report.macro_classes;
    report.macro_recall /= report.macro_classes;
    report.macro_f1 /= report.macro_classes;
  }
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [cls, m] : per_class) {
    per[std::string(absa::polarity_name(cls))] = {
        {"precision", m.precision},
        {"recall", m.recall},
        {"f1", m.f1},
        {"support", m.support},
        {"precision_defined", m.precision_defined},
        {"recall_defined", m.recall_defined},
        {"f1_defined", m.f1_defined}};
  }
  nlohmann::json conf = nlohmann::json::array();
  static constexpr std::array<const char*, 4> kPredNames = {
      "predicted_positive", "predicted_neutral", "predicted_negative",
      "predicted_absent"};
  for (int p = 0; p < 4; ++p) {
    conf.push_back({{"row", kPredNames[p]},
                    {"gold_positive", confusion[p][0]},
                    {"gold_neutral", confusion[p][1]},
                    {"gold_negative", confusion[p][2]}});
  }
  return nlohmann::json{{"per_class", per},
                        {"accuracy", accuracy},
                        {"n_rows", n_rows},
                        {"confusion", conf},
                        {"macro_precision", macro_precision},
                        {"macro_recall", macro_recall},
                        {"macro_f1", macro_f1},
                        {"macro_classes", macro_classes}};
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char buf[128];
  out << "Class      Precision  Recall     F1         Support\n";
  for (Polarity cls : kClasses) {
    const ClassMetrics& m = per_class.at(cls);
    std::snprintf(buf, sizeof buf, "%-9s  %-9.4f  %-9.4f  %-9.4f  %ld%s\n",
                  std::string(absa::polarity_name(cls)).c_str(), m.precision, m.recall,
                  m.f1, m.support, m.support == 0 ? " (zero support)" : "");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "accuracy   %.4f over %ld instances\n", accuracy,
                n_rows);
  out << buf;
  std::snprintf(buf, sizeof buf, "macro      %-9.4f  %-9.4f  %-9.4f  (%d classes)\n",
                macro_precision, macro_recall, macro_f1, macro_classes);
  out << buf;
  out << "\nConfusion (rows = predicted, columns = gold)\n";
  out << "            gold_pos  gold_neu  gold_neg\n";
  static constexpr std::array<const char*, 4> kRows = {"pred_pos", "pred_neu",
                                                       "pred_neg", "absent"};
  for (int p = 0; p < 4; ++p) {
    std::snprintf(buf, sizeof buf, "%-10s  %8ld  %8ld  %8ld\n", kRows[p],
                  confusion[p][0], confusion[p][1], confusion[p][2]);
    out << buf;
  }
  return std::move(out).str();
}

std::vector<AnnotationRecord> load_annotations_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto rid = table.column("review_id");
  const auto aid = table.column("annotator_id");
  const auto asp = table.column("aspect");
  const auto pol = table.column("polarity");
  if (!rid || !aid || !asp || !pol)
    throw PipelineError("annotations",
                        "CSV must have columns review_id,annotator_id,aspect,polarity");

  std::map<std::pair<std::string, int>, AnnotationRecord> grouped;
  for (const auto& row : table.rows) {
    if (row.size() < table.header.size())
      throw PipelineError("annotations", "short row in " + path.string());
    const std::string& review_id = row[*rid];
    int annotator = 0;
    try {
      annotator = std::stoi(row[*aid]);
    } catch (const std::exception&) {
      throw PipelineError("annotations", "bad annotator_id: " + row[*aid]);
    }
    const auto aspect = absa::aspect_from_name(row[*asp]);
    if (!aspect) throw PipelineError("annotations", "unknown aspect: " + row[*asp]);
    const auto polarity = absa::polarity_from_name(row[*pol]);
    if (!polarity) throw PipelineError("annotations", "unknown polarity: " + row[*pol]);
    AnnotationRecord& rec = grouped[{review_id, annotator}];
    rec.review_id = review_id;
    rec.annotator_id = annotator;
    rec.labels[*aspect] = *polarity;
  }
  std::vector<AnnotationRecord> out;
  out.reserve(grouped.size());
  for (auto& [_, rec] : grouped) out.push_back(std::move(rec));
  return out;
}

}  // namespace carescope::eval
