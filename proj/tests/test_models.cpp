#include <doctest.h>

#include <cmath>
#include <random>

#include "carescope/models.hpp"
#include "oracles.hpp"

using namespace carescope;
using namespace carescope::stats;
using absa::Aspect;

namespace {

// Synthetic profile sample with independent aspect means and a known
// generating model for the rating.
struct Sample {
  std::vector<census::EnrichedProfile> enriched;
  std::vector<agg::FacilityAspectProfile> base;
};

Sample make_sample(std::mt19937_64& rng, int n, double beta_interp, double beta_opeff,
                   double gamma_density, double noise_sd) {
  std::uniform_real_distribution<double> theta(-0.8, 0.8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_sd);

  std::vector<double> densities(n);
  for (auto& d : densities) d = 200.0 + 7800.0 * unit(rng);
  const auto z = census::zscore(densities, "density");

  Sample s;
  for (int i = 0; i < n; ++i) {
    census::EnrichedProfile e;
    e.profile.facility_id = "f" + std::to_string(i);
    e.profile.region = i % 2 == 0 ? corpus::Region::kFl : corpus::Region::kDmv;
    e.profile.n_text_reviews = 50;
    for (Aspect a : absa::kAllAspects) {
      e.profile.aspect_mean[a] = theta(rng);
      e.profile.aspect_count[a] = 50;
    }
    e.cbg.cbg_id = "120570001001";
    e.cbg.population_density = densities[i];
    e.cbg.median_income = 30000 + 120000 * unit(rng);
    e.cbg.rent_to_income_ratio = 0.15 + 0.3 * unit(rng);
    e.cbg.gini_index = 0.3 + 0.25 * unit(rng);
    e.cbg.household_below_poverty_rate = 0.03 + 0.3 * unit(rng);
    e.cbg.no_insurance_rate = 0.02 + 0.2 * unit(rng);
    e.cbg.unemployment_rate = 0.02 + 0.13 * unit(rng);
    e.profile.mean_rating = 3.0 +
                            beta_interp * e.profile.aspect_mean[Aspect::kInterpersonal] +
                            beta_opeff *
                                e.profile.aspect_mean[Aspect::kOperationalEfficiency] +
                            gamma_density * z[i] + noise(rng);
    s.base.push_back(e.profile);
    s.enriched.push_back(std::move(e));
  }
  return s;
}

std::size_t column_of(const RegressionFit& fit, std::string_view name) {
  for (std::size_t j = 0; j < fit.column_names.size(); ++j)
    if (fit.column_names[j] == name) return j;
  REQUIRE(false);
  return 0;
}

}  // namespace

TEST_CASE("fit_model1 recovers a planted interpersonal effect") {
  std::mt19937_64 rng(42);
  const Sample s = make_sample(rng, 400, 1.7, 0.0, 0.0, 0.05);
  const RegressionFit fit = fit_model1(s.base);
  REQUIRE(fit.column_names.size() == 6);
  CHECK(fit.column_names[0] == "Interpersonal Factors");
  CHECK(fit.column_names[5] == "Intercept");
  const std::size_t j = column_of(fit, "Interpersonal Factors");
  CHECK(fit.coefficients[j] >= 1.6);
  CHECK(fit.coefficients[j] <= 1.8);
  CHECK(fit.p_values[j] < 0.001);
}

TEST_CASE("fit_model1 rejects constant ratings and tiny samples") {
  std::mt19937_64 rng(1);
  Sample s = make_sample(rng, 40, 1.0, 0.0, 0.0, 0.05);
  for (auto& p : s.base) p.mean_rating = 4.0;
  CHECK_THROWS_AS(fit_model1(s.base), ZeroVarianceError);

  const Sample tiny = make_sample(rng, 5, 1.0, 0.0, 0.0, 0.05);
  CHECK_THROWS_AS(fit_model1(tiny.base), InsufficientDataError);
}

TEST_CASE("fit_model1 requires every aspect mean") {
  std::mt19937_64 rng(2);
  Sample s = make_sample(rng, 40, 1.0, 0.0, 0.0, 0.05);
  s.base[3].aspect_mean.erase(Aspect::kFinances);
  CHECK_THROWS_AS(fit_model1(s.base), StatsError);
}

TEST_CASE("fit_model2 column layout matches the report order") {
  std::mt19937_64 rng(3);
  const Sample s = make_sample(rng, 120, 1.7, 0.3, 0.02, 0.05);
  const RegressionFit fit = fit_model2(s.enriched);
  REQUIRE(fit.column_names.size() == 13);
  CHECK(fit.column_names[0] == "Interpersonal Factors");
  CHECK(fit.column_names[4] == "Facilities/Availability");
  CHECK(fit.column_names[5] == "Population Density");
  CHECK(fit.column_names[11] == "Unemployment Rate");
  CHECK(fit.column_names[12] == "Intercept");
  CHECK(fit.n_obs == 120);
}

TEST_CASE("planted density effect is detected at n=500") {
  std::mt19937_64 rng(7);
  const Sample s = make_sample(rng, 500, 1.7, 0.3, 0.02, 0.05);
  const RegressionFit fit = fit_model2(s.enriched);
  const std::size_t j = column_of(fit, "Population Density");
  CHECK(fit.coefficients[j] > 0.0);
  CHECK(fit.p_values[j] < 0.05);
}

TEST_CASE("covariates without planted effects stay insignificant across seeds") {
  // ~95% of two-sided tests at alpha=0.05 should accept the null; with
  // 100 seeds the count concentrates well above 85.
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(9000 + seed);
    const Sample s = make_sample(rng, 150, 1.7, 0.3, 0.0, 0.05);
    const RegressionFit fit = fit_model2(s.enriched);
    const std::size_t j = column_of(fit, "GINI Index");
    if (fit.p_values[j] > 0.05) ++ok;
  }
  CHECK(ok >= 85);
  CHECK(ok <= 100);
}

TEST_CASE("fit_interactions appends centered products in the declared order") {
  std::mt19937_64 rng(11);
  const Sample s = make_sample(rng, 200, 1.7, 0.3, 0.02, 0.05);
  const RegressionFit fit = fit_interactions(s.enriched);
  REQUIRE(fit.column_names.size() == 16);
  CHECK(fit.column_names[12] == "Interpersonal Factors x Operational Efficiency");
  CHECK(fit.column_names[13] == "Interpersonal Factors x Population Density");
  CHECK(fit.column_names[14] == "Operational Efficiency x Population Density");
  CHECK(fit.column_names[15] == "Intercept");
}

TEST_CASE("interaction terms stay insignificant when no interaction is planted") {
  int ok_per_term[3] = {0, 0, 0};
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(7000 + seed);
    const Sample s = make_sample(rng, 150, 1.7, 0.3, 0.02, 0.05);
    const RegressionFit fit = fit_interactions(s.enriched);
    const char* names[3] = {"Interpersonal Factors x Operational Efficiency",
                            "Interpersonal Factors x Population Density",
                            "Operational Efficiency x Population Density"};
    for (int k = 0; k < 3; ++k)
      if (fit.p_values[column_of(fit, names[k])] > 0.05) ++ok_per_term[k];
  }
  for (int k = 0; k < 3; ++k) CHECK(ok_per_term[k] >= 85);
}

TEST_CASE("a planted interaction is recovered within two standard errors") {
  std::mt19937_64 rng(13);
  Sample s = make_sample(rng, 500, 1.7, 0.3, 0.02, 0.05);
  // Plant interpersonal x density on top of the base model.
  const double planted = 0.15;
  std::vector<double> interp, density;
  for (const auto& e : s.enriched) {
    interp.push_back(e.profile.aspect_mean.at(Aspect::kInterpersonal));
    density.push_back(e.cbg.population_density);
  }
  const auto ci = center(interp);
  const auto zd = census::zscore(density, "density");
  for (std::size_t i = 0; i < s.enriched.size(); ++i)
    s.enriched[i].profile.mean_rating += planted * ci[i] * zd[i];

  const RegressionFit fit = fit_interactions(s.enriched);
  const std::size_t j = column_of(fit, "Interpersonal Factors x Population Density");
  CHECK(std::fabs(fit.coefficients[j] - planted) <= 2.0 * fit.standard_errors[j]);
  CHECK(fit.p_values[j] < 0.001);
}

TEST_CASE("interaction columns carry the product-of-centered mean, not zero") {
  std::mt19937_64 rng(17);
  const Sample s = make_sample(rng, 200, 1.7, 0.3, 0.02, 0.05);
  std::vector<double> interp, opeff;
  for (const auto& e : s.enriched) {
    interp.push_back(e.profile.aspect_mean.at(Aspect::kInterpersonal));
    opeff.push_back(e.profile.aspect_mean.at(Aspect::kOperationalEfficiency));
  }
  const auto ci = center(interp);
  const auto co = center(opeff);
  double product_mean = 0.0;
  for (std::size_t i = 0; i < ci.size(); ++i) product_mean += ci[i] * co[i];
  product_mean /= static_cast<double>(ci.size());
  // The product of centered columns has mean equal to their covariance,
  // generally nonzero.
  CHECK(std::fabs(product_mean) > 0.0);
}

TEST_CASE("model2 covariate columns are standardized over the sample") {
  std::mt19937_64 rng(19);
  const Sample s = make_sample(rng, 150, 1.7, 0.3, 0.02, 0.05);
  std::vector<double> densities;
  for (const auto& e : s.enriched) densities.push_back(e.cbg.population_density);
  const auto z = census::zscore(densities, "density");
  double mean = 0.0, ss = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  for (double v : z) ss += (v - mean) * (v - mean);
  CHECK(std::fabs(mean) <= 1e-12);
  CHECK(std::fabs(std::sqrt(ss / (z.size() - 1)) - 1.0) <= 1e-12);
}

TEST_CASE("sensitivity_run grows the sample and drops the Finances column") {
  std::mt19937_64 rng(23);
  Sample s = make_sample(rng, 300, 1.7, 0.3, 0.02, 0.05);
  // Downsample Finances coverage: only 30% of facilities have enough.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& e : s.enriched) {
    if (unit(rng) > 0.3) {
      e.profile.aspect_count[Aspect::kFinances] = 0;
      e.profile.aspect_mean.erase(Aspect::kFinances);
    }
  }
  const agg::FilterPolicy strict = agg::FilterPolicy::uniform(10);
  const SensitivityResult out = sensitivity_run(s.enriched, strict,
                                                strict.relaxed_finances());
  CHECK(out.n_relaxed > out.n_strict);
  CHECK(out.relaxed_fit.column_names.size() == 12);  // 11 predictors + intercept
  for (const auto& name : out.relaxed_fit.column_names) CHECK(name != "Finances");

  const std::size_t j_strict = column_of(out.strict_fit, "Interpersonal Factors");
  const std::size_t j_relaxed = column_of(out.relaxed_fit, "Interpersonal Factors");
  CHECK(out.strict_fit.p_values[j_strict] < 0.001);
  CHECK(out.relaxed_fit.p_values[j_relaxed] < 0.001);
}

TEST_CASE("sensitivity_run validates the relaxed policy") {
  std::mt19937_64 rng(29);
  const Sample s = make_sample(rng, 60, 1.7, 0.3, 0.0, 0.05);
  agg::FilterPolicy strict = agg::FilterPolicy::uniform(10);
  agg::FilterPolicy wrong = agg::FilterPolicy::uniform(5);  // relaxes everything
  CHECK_THROWS_AS(sensitivity_run(s.enriched, strict, wrong), UsageError);
}

TEST_CASE("corr_matrix is symmetric with a unit diagonal") {
  std::mt19937_64 rng(31);
  const Sample s = make_sample(rng, 80, 1.7, 0.3, 0.0, 0.05);
  const CorrMatrixResult result = corr_matrix(s.base, false);
  REQUIRE(result.matrices.size() == 1);
  const CorrMatrix& m = result.matrices[0];
  REQUIRE(m.names.size() == 6);
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    CHECK(m.cells[i][i].r == 1.0);
    for (std::size_t j = 0; j < m.names.size(); ++j)
      CHECK(m.cells[i][j].r == m.cells[j][i].r);
  }
}

TEST_CASE("corr_matrix reports a perfect correlation when planted") {
  std::mt19937_64 rng(37);
  Sample s = make_sample(rng, 50, 0.0, 0.0, 0.0, 0.05);
  for (auto& p : s.base)
    p.mean_rating = p.aspect_mean.at(Aspect::kInterpersonal);  // identical columns
  const CorrMatrixResult result = corr_matrix(s.base, false);
  const CorrMatrix& m = result.matrices[0];
  CHECK(m.cells[0][5].r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("corr_matrix by region skips tiny strata with a warning") {
  std::mt19937_64 rng(41);
  Sample s = make_sample(rng, 60, 1.0, 0.0, 0.0, 0.05);
  for (auto& p : s.base) p.region = corpus::Region::kFl;
  s.base[0].region = corpus::Region::kDmv;
  s.base[1].region = corpus::Region::kDmv;  // only two in DMV
  const CorrMatrixResult result = corr_matrix(s.base, true);
  CHECK(result.matrices.size() == 1);
  CHECK(result.matrices[0].label == "FL");
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("DMV") != std::string::npos);
}
