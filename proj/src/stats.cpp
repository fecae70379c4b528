#include "carescope/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace carescope::stats {

namespace {

constexpr double kRankTolerance = 1e-10;

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void require_finite(const DesignMatrix& design) {
  if (!design.values.allFinite())
    throw StatsError("design matrix contains non-finite entries");
  if (static_cast<std::size_t>(design.values.cols()) != design.column_names.size())
    throw StatsError("design matrix column/name count mismatch");
}

}  // namespace

double ibeta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw StatsError("ibeta: a and b must be positive");
  if (std::isnan(x)) throw StatsError("ibeta: x is NaN");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double t_cdf(double t, int df) {
  if (df < 1) throw StatsError("t_cdf: df must be >= 1");
  if (!std::isfinite(t)) throw StatsError("t_cdf: non-finite t");
  const double x = df / (df + t * t);
  const double tail = 0.5 * ibeta(0.5 * df, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

double t_two_sided_p(double t, int df) {
  if (df < 1) throw StatsError("t_two_sided_p: df must be >= 1");
  if (std::isnan(t)) throw StatsError("t_two_sided_p: NaN t");
  if (std::isinf(t)) return 0.0;
  return ibeta(0.5 * df, 0.5, df / (df + t * t));
}

double f_cdf(double f, int df1, int df2) {
  if (df1 < 1 || df2 < 1) throw StatsError("f_cdf: df must be >= 1");
  if (std::isnan(f)) throw StatsError("f_cdf: NaN f");
  if (f <= 0.0) return 0.0;
  if (std::isinf(f)) return 1.0;
  return ibeta(0.5 * df1, 0.5 * df2, df1 * f / (df1 * f + df2));
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("pearson: length mismatch");
  const long n = static_cast<long>(x.size());
  if (n < 3) throw InsufficientDataError("pearson: need n >= 3");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (long i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw ZeroVarianceError("x");
  if (syy == 0.0) throw ZeroVarianceError("y");
  CorrelationResult out;
  out.n = n;
  out.r = sxy / std::sqrt(sxx * syy);
  out.r = std::clamp(out.r, -1.0, 1.0);
  const double denom = 1.0 - out.r * out.r;
  if (denom <= 0.0) {
    out.p_value = 0.0;
  } else {
    const double t = out.r * std::sqrt((n - 2) / denom);
    out.p_value = t_two_sided_p(t, static_cast<int>(n - 2));
  }
  return out;
}

RegressionFit ols_fit(const DesignMatrix& design, std::span<const double> y) {
  require_finite(design);
  const long n = design.values.rows();
  const long p = design.values.cols();
  if (static_cast<long>(y.size()) != n) throw StatsError("ols_fit: y length mismatch");
  if (n <= p) throw InsufficientDataError("ols_fit: need n > p");
  for (double v : y)
    if (!std::isfinite(v)) throw StatsError("ols_fit: non-finite response");

  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

  const double y_mean = yv.mean();
  double sst = design.intercept_included ? (yv.array() - y_mean).square().sum()
                                         : yv.squaredNorm();
  if (sst == 0.0) throw ZeroVarianceError("y");

  // Rank test on singular values; QR pivot order names the dependent columns.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design.values);
  const auto& sv = svd.singularValues();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.values);
  if (sv(sv.size() - 1) < kRankTolerance * sv(0)) {
    long rank = 0;
    while (rank < sv.size() && sv(rank) >= kRankTolerance * sv(0)) ++rank;
    std::vector<std::string> dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (long j = rank; j < p; ++j)
      dependent.push_back(design.column_names[perm(j)]);
    std::sort(dependent.begin(), dependent.end());
    std::string msg = "collinear design; dependent columns:";
    for (const auto& c : dependent) msg += " " + c;
    throw CollinearityError(msg, dependent);
  }

  const Eigen::VectorXd beta = qr.solve(yv);
  const Eigen::VectorXd fitted = design.values * beta;
  const Eigen::VectorXd resid = yv - fitted;
  const double ssr = resid.squaredNorm();
  const long df_resid = n - p;
  const double sigma2 = ssr / static_cast<double>(df_resid);

  // (X^T X)^{-1} = P (R^T R)^{-1} P^T from the pivoted factorization.
  const Eigen::MatrixXd r_full =
      qr.matrixQR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r_full.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd xtx_inv_permuted = r_inv * r_inv.transpose();
  const Eigen::MatrixXd xtx_inv =
      qr.colsPermutation() * xtx_inv_permuted * qr.colsPermutation().transpose();

  RegressionFit fit;
  fit.column_names = design.column_names;
  fit.n_obs = n;
  fit.df_resid = df_resid;
  fit.coefficients.assign(beta.data(), beta.data() + p);
  fit.residuals.assign(resid.data(), resid.data() + n);
  fit.standard_errors.resize(p);
  fit.t_values.resize(p);
  fit.p_values.resize(p);
  for (long j = 0; j < p; ++j) {
    const double se = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
    fit.standard_errors[j] = se;
    if (se > 0.0) {
      fit.t_values[j] = beta(j) / se;
      fit.p_values[j] = t_two_sided_p(fit.t_values[j], static_cast<int>(df_resid));
    } else {
      // Exact fit: zero residual variance.
      fit.t_values[j] = beta(j) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() *
                                                   (beta(j) > 0 ? 1.0 : -1.0);
      fit.p_values[j] = beta(j) == 0.0 ? 1.0 : 0.0;
    }
  }

  fit.r_squared = 1.0 - ssr / sst;
  const double adj_num = design.intercept_included ? static_cast<double>(n - 1)
                                                   : static_cast<double>(n);
  fit.adj_r_squared = 1.0 - (1.0 - fit.r_squared) * adj_num / static_cast<double>(df_resid);

  const long df_model = design.intercept_included ? p - 1 : p;
  if (df_model >= 1) {
    const double denom = 1.0 - fit.r_squared;
    if (denom <= 0.0) {
      fit.f_statistic = std::numeric_limits<double>::infinity();
      fit.f_p_value = 0.0;
    } else {
      fit.f_statistic = (fit.r_squared / static_cast<double>(df_model)) /
                        (denom / static_cast<double>(df_resid));
      fit.f_p_value = 1.0 - f_cdf(fit.f_statistic, static_cast<int>(df_model),
                                  static_cast<int>(df_resid));
    }
  } else {
    fit.f_statistic = std::numeric_limits<double>::quiet_NaN();
    fit.f_p_value = std::numeric_limits<double>::quiet_NaN();
  }
  return fit;
}

VifReport vif(const DesignMatrix& predictors) {
  require_finite(predictors);
  const long n = predictors.values.rows();
  const long p = predictors.values.cols();
  if (predictors.intercept_included)
    throw StatsError("vif: pass the design without an intercept column");
  if (p < 2) throw InsufficientDataError("vif: need at least two predictors");
  if (n <= p) throw InsufficientDataError("vif: need n > p");

  VifReport report;
  for (long j = 0; j < p; ++j) {
    DesignMatrix others;
    others.intercept_included = true;
    others.values.resize(n, p);
    long k = 0;
    for (long c = 0; c < p; ++c) {
      if (c == j) continue;
      others.values.col(k) = predictors.values.col(c);
      others.column_names.push_back(predictors.column_names[c]);
      ++k;
    }
    others.values.col(p - 1).setOnes();
    others.column_names.emplace_back("Intercept");

    VifEntry entry;
    entry.name = predictors.column_names[j];
    std::vector<double> target(predictors.values.col(j).data(),
                               predictors.values.col(j).data() + n);
    try {
      const RegressionFit sub = ols_fit(others, target);
      const double denom = 1.0 - sub.r_squared;
      if (denom <= 1e-12) {
        entry.infinite = true;
        entry.vif = std::numeric_limits<double>::infinity();
      } else {
        entry.vif = 1.0 / denom;
      }
    } catch (const CollinearityError&) {
      entry.infinite = true;
      entry.vif = std::numeric_limits<double>::infinity();
    } catch (const ZeroVarianceError&) {
      // Constant column: perfectly collinear with the intercept.
      entry.infinite = true;
      entry.vif = std::numeric_limits<double>::infinity();
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::vector<double> center(std::span<const double> values) {
  if (values.empty()) return {};
  const double m = mean_of(values);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] - m;
  return out;
}

std::string significance_stars(double p_value) {
  if (p_value < 0.001) return "***";
  if (p_value < 0.05) return "**";
  return "";
}

nlohmann::json RegressionFit::to_json() const {
  return nlohmann::json{{"columns", column_names}, {"coef", coefficients},
                        {"se", standard_errors},   {"t", t_values},
                        {"p", p_values},           {"r2", r_squared},
                        {"adj_r2", adj_r_squared}, {"f", f_statistic},
                        {"f_p", f_p_value},        {"n", n_obs}};
}

std::string RegressionFit::to_table(const std::string& title) const {
  std::size_t name_width = 18;  // at least "Adjusted R-squared"
  for (const auto& name : column_names) name_width = std::max(name_width, name.size());

  std::ostringstream out;
  out << title << "\n";
  const std::string rule(name_width + 24, '-');
  out << rule << "\n";

  auto emit_kv = [&](std::string_view label, std::string_view value) {
    out << label << std::string(name_width + 2 - label.size(), ' ') << value << "\n";
  };
  char buf[96];
  auto emit_row = [&](std::size_t j) {
    std::snprintf(buf, sizeof buf, "%.3f%s (%.3f)", coefficients[j],
                  significance_stars(p_values[j]).c_str(), standard_errors[j]);
    emit_kv(column_names[j], buf);
  };
  // Intercept last, matching the usual report layout.
  for (std::size_t j = 0; j < column_names.size(); ++j)
    if (column_names[j] != "Intercept") emit_row(j);
  for (std::size_t j = 0; j < column_names.size(); ++j)
    if (column_names[j] == "Intercept") emit_row(j);

  out << rule << "\n";
  std::snprintf(buf, sizeof buf, "%.3f", r_squared);
  emit_kv("R-squared", buf);
  std::snprintf(buf, sizeof buf, "%.3f", adj_r_squared);
  emit_kv("Adjusted R-squared", buf);
  std::snprintf(buf, sizeof buf, "%.1f%s", f_statistic,
                significance_stars(f_p_value).c_str());
  emit_kv("F-statistic", buf);
  emit_kv("Observations", std::to_string(n_obs));
  out << "Note: Standard errors in parentheses. ** p < 0.05, *** p < 0.001.\n";
  return std::move(out).str();
}

nlohmann::json VifReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"variable", e.name},
                   {"vif", e.infinite ? nlohmann::json() : nlohmann::json(e.vif)},
                   {"infinite", e.infinite}});
  }
  return nlohmann::json{{"vif", arr}};
}

std::string VifReport::to_table() const {
  std::size_t name_width = 8;
  for (const auto& e : entries) name_width = std::max(name_width, e.name.size());
  std::ostringstream out;
  out << "Variable" << std::string(name_width - 8 + 2, ' ') << "VIF\n";
  char buf[48];
  for (const auto& e : entries) {
    out << e.name << std::string(name_width - e.name.size() + 2, ' ');
    if (e.infinite) {
      out << "inf\n";
    } else {
      std::snprintf(buf, sizeof buf, "%.6f", e.vif);
      out << buf << "\n";
    }
  }
  return std::move(out).str();
}

}  // namespace carescope::stats
