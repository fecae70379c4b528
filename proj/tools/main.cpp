#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "carescope/commands.hpp"
#include "carescope/util.hpp"

namespace {

using carescope::cli::RunConfig;

struct CliOverrides {
  std::string config_file;
  std::string out_dir;
  std::string regions;
  std::string backend;
  std::string model;
  std::string cache_dir;
  long min_reviews = -1;
  long long seed = -1;
  int concurrency = -1;
};

RunConfig resolve_config(const CliOverrides& o) {
  RunConfig config;
  if (!o.config_file.empty()) config = RunConfig::from_file(o.config_file);
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  if (o.min_reviews >= 0) config.min_reviews = o.min_reviews;
  if (o.seed >= 0) config.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.regions.empty()) {
    config.regions.clear();
    for (const auto& name : carescope::split(o.regions, ',')) {
      const auto region = carescope::corpus::region_from_name(
          std::string(carescope::trim(name)));
      if (!region) throw carescope::UsageError("unknown region: " + name);
      config.regions.insert(*region);
    }
  }
  if (!o.backend.empty()) {
    const auto kind = carescope::absa::backend_kind_from_name(o.backend);
    if (!kind) throw carescope::UsageError("unknown backend: " + o.backend);
    config.backend.kind = *kind;
  }
  if (!o.model.empty()) config.backend.model_name = o.model;
  if (!o.cache_dir.empty()) config.backend.cache_dir = o.cache_dir;
  if (o.concurrency > 0) config.backend.concurrency = o.concurrency;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Review analytics pipeline: ingest, classify, aggregate, fit, report"};
  app.require_subcommand(1);

  CliOverrides o;
  app.add_option("--config", o.config_file, "JSON config file");
  app.add_option("--out", o.out_dir, "Output directory (overrides config)");
  app.add_option("--seed", o.seed, "Seed for synthetic/Monte Carlo commands");
  app.add_option("--regions", o.regions, "Comma-separated region filter (DMV,FL,OTHER)");
  app.add_option("--min-reviews", o.min_reviews, "Per-aspect review threshold");
  app.add_option("--backend", o.backend, "Backend kind: remote-llm, lexicon, replay-cache");
  app.add_option("--model", o.model, "Backend model name");
  app.add_option("--cache-dir", o.cache_dir, "Response cache directory");
  app.add_option("--concurrency", o.concurrency, "Concurrent backend requests");

  std::string reviews, pois, cbg_profiles, cbg_geometries, facility_cbg, annotations;
  std::string reviews_format, pois_format;
  std::vector<std::string> predictions;

  auto* ingest = app.add_subcommand("ingest", "Filter reviews and facilities");
  ingest->add_option("--reviews", reviews, "Reviews file (JSON-lines or CSV)");
  ingest->add_option("--pois", pois, "POI metadata file");
  ingest->add_option("--reviews-format", reviews_format, "jsonl or csv");
  ingest->add_option("--pois-format", pois_format, "jsonl or csv");

  auto* classify = app.add_subcommand("classify", "Classify review sentiment per aspect");

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against annotations");
  evaluate->add_option("--annotations", annotations, "Gold annotations CSV");
  evaluate->add_option("--predictions", predictions,
                       "Prediction JSON-lines files (repeatable)");

  auto* aggregate = app.add_subcommand("aggregate", "Roll up per-facility profiles");

  auto* join_census = app.add_subcommand("join-census", "Attach CBG covariates");
  join_census->add_option("--cbg", cbg_profiles, "CBG covariates CSV");
  join_census->add_option("--geometries", cbg_geometries, "CBG boundaries GeoJSON");
  join_census->add_option("--facility-cbg", facility_cbg,
                          "Precomputed facility_id,cbg_id CSV (skips geometry)");

  auto* fit = app.add_subcommand("fit", "Fit the rating models");
  auto* report = app.add_subcommand("report", "Emit tables, GeoJSON map, box plots");
  auto* synthesize =
      app.add_subcommand("synthesize", "Generate a synthetic corpus with ground truth");
  auto* e2e = app.add_subcommand("e2e-check",
                                 "Synthesize, run the pipeline, verify recovery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    RunConfig config = resolve_config(o);
    if (!reviews.empty()) config.reviews_path = reviews;
    if (!pois.empty()) config.pois_path = pois;
    if (!cbg_profiles.empty()) config.cbg_profiles_path = cbg_profiles;
    if (!cbg_geometries.empty()) config.cbg_geometries_path = cbg_geometries;
    if (!facility_cbg.empty()) config.facility_cbg_path = facility_cbg;
    if (!annotations.empty()) config.annotations_path = annotations;
    for (const auto& p : predictions) config.predictions_paths.emplace_back(p);
    auto parse_format = [](const std::string& name) {
      if (name == "jsonl" || name == "json-lines")
        return carescope::corpus::InputFormat::kJsonLines;
      if (name == "csv") return carescope::corpus::InputFormat::kCsv;
      throw carescope::UsageError("unknown format: " + name);
    };
    if (!reviews_format.empty()) config.reviews_format = parse_format(reviews_format);
    if (!pois_format.empty()) config.pois_format = parse_format(pois_format);
    config.synth_params.seed = config.seed;

    if (ingest->parsed()) {
      carescope::cli::cmd_ingest(config);
    } else if (classify->parsed()) {
      carescope::cli::cmd_classify(config);
    } else if (evaluate->parsed()) {
      carescope::cli::cmd_evaluate(config);
    } else if (aggregate->parsed()) {
      carescope::cli::cmd_aggregate(config);
    } else if (join_census->parsed()) {
      carescope::cli::cmd_join_census(config);
    } else if (fit->parsed()) {
      carescope::cli::cmd_fit(config);
    } else if (report->parsed()) {
      carescope::cli::cmd_report(config);
    } else if (synthesize->parsed()) {
      carescope::cli::cmd_synthesize(config);
    } else if (e2e->parsed()) {
      if (!carescope::cli::cmd_e2e_check(config)) {
        std::cerr << "e2e-check: one or more recovery checks failed\n";
        return 1;
      }
    }
  } catch (const carescope::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const carescope::PipelineError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
