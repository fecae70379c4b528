#pragma once

#include <Eigen/Dense>

#include <nlohmann/json_fwd.hpp>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace carescope::stats {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroVarianceError : public StatsError {
 public:
  explicit ZeroVarianceError(const std::string& variable)
      : StatsError("zero variance in " + variable), variable_(variable) {}
  const std::string& variable() const { return variable_; }

 private:
  std::string variable_;
};

class InsufficientDataError : public StatsError {
 public:
  using StatsError::StatsError;
};

// Raised when the design is rank deficient; carries the offending columns.
class CollinearityError : public StatsError {
 public:
  CollinearityError(const std::string& message, std::vector<std::string> columns)
      : StatsError(message), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
// Absolute error well below 1e-10 over the parameter ranges used here.
double ibeta(double a, double b, double x);

// CDF of Student's t with df degrees of freedom. t_cdf(0, df) == 0.5 exactly.
double t_cdf(double t, int df);

// Two-sided p-value for a t statistic (df residual degrees of freedom).
double t_two_sided_p(double t, int df);

// CDF of the F distribution, for the regression F test.
double f_cdf(double f, int df1, int df2);

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;
  long n = 0;
};

// Product-moment correlation with a two-sided t test (df = n-2).
// Requires equal lengths, n >= 3 and nonzero variance on both sides.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

struct DesignMatrix {
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;  // n x p, intercept column included when flagged
  bool intercept_included = false;
};

struct RegressionFit {
  std::vector<std::string> column_names;
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> t_values;
  std::vector<double> p_values;
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  double f_statistic = 0.0;
  double f_p_value = 1.0;
  long n_obs = 0;
  long df_resid = 0;
  std::vector<double> residuals;

  nlohmann::json to_json() const;
  // Aligned text table: coefficient, standard error in parentheses,
  // significance stars (** p < 0.05, *** p < 0.001), fit block at the bottom.
  std::string to_table(const std::string& title) const;
};

// Least squares via column-pivoted Householder QR. Rank deficiency (smallest
// singular value below 1e-10 of the largest) raises CollinearityError naming
// the dependent columns.
RegressionFit ols_fit(const DesignMatrix& design, std::span<const double> y);

struct VifEntry {
  std::string name;
  double vif = 1.0;
  bool infinite = false;
};

struct VifReport {
  std::vector<VifEntry> entries;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// VIF_j = 1 / (1 - R^2_j), column j regressed on the remaining columns plus
// an intercept. The design must not already contain an intercept column.
VifReport vif(const DesignMatrix& predictors);

// Shifts values to mean zero, leaving scale untouched.
std::vector<double> center(std::span<const double> values);

std::string significance_stars(double p_value);

}  // namespace carescope::stats
