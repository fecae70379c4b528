#pragma once

// Test-only reference implementations, deliberately independent of the
// library's computation paths: normal equations with Gauss-Jordan inversion
// instead of QR, quadrature instead of continued fractions, full sorts
// instead of selection. Slow and simple on purpose.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Dense helpers (row-major, std::vector storage).

using Matrix = std::vector<std::vector<double>>;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size(), k = b.size(), m = b[0].size();
  Matrix c(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][l] * b[l][j];
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

// Gauss-Jordan with partial pivoting.
inline Matrix invert(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (a[pivot][col] == 0.0) throw std::runtime_error("oracle: singular matrix");
    std::swap(a[pivot], a[col]);
    std::swap(inv[pivot], inv[col]);
    const double d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

// ---------------------------------------------------------------------------
// OLS by explicit normal equations: beta = (X^T X)^{-1} X^T y.

struct OlsResult {
  std::vector<double> beta;
  std::vector<double> se;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double f = 0.0;
  std::vector<double> residuals;
};

inline OlsResult ols_normal_equations(const Matrix& x, const std::vector<double>& y,
                                      bool intercept_included) {
  const std::size_t n = x.size(), p = x[0].size();
  const Matrix xt = transpose(x);
  const Matrix xtx = matmul(xt, x);
  const Matrix xtx_inv = invert(xtx);

  std::vector<double> xty(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < n; ++i) xty[j] += x[i][j] * y[i];

  OlsResult r;
  r.beta.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < p; ++k) r.beta[j] += xtx_inv[j][k] * xty[k];

  r.residuals.assign(n, 0.0);
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t j = 0; j < p; ++j) fit += x[i][j] * r.beta[j];
    r.residuals[i] = y[i] - fit;
    ssr += r.residuals[i] * r.residuals[i];
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double sst = 0.0;
  for (double v : y) sst += intercept_included ? (v - mean) * (v - mean) : v * v;

  const double sigma2 = ssr / static_cast<double>(n - p);
  r.se.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) r.se[j] = std::sqrt(sigma2 * xtx_inv[j][j]);
  r.r2 = 1.0 - ssr / sst;
  const double adj_num = intercept_included ? n - 1.0 : static_cast<double>(n);
  r.adj_r2 = 1.0 - (1.0 - r.r2) * adj_num / static_cast<double>(n - p);
  const double df_model = intercept_included ? p - 1.0 : static_cast<double>(p);
  r.f = (r.r2 / df_model) / ((1.0 - r.r2) / static_cast<double>(n - p));
  return r;
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature.

template <typename F>
double simpson(F f, double a, double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

template <typename F>
double adaptive_simpson(F f, double a, double b, double eps, double whole, int depth) {
  const double c = 0.5 * (a + b);
  const double left = simpson(f, a, c);
  const double right = simpson(f, c, b);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, c, eps / 2.0, left, depth - 1) +
         adaptive_simpson(f, c, b, eps / 2.0, right, depth - 1);
}

template <typename F>
double integrate(F f, double a, double b, double eps = 1e-13) {
  if (a == b) return 0.0;
  return adaptive_simpson(f, a, b, eps, simpson(f, a, b), 48);
}

// Student t CDF via direct integration of the density.
inline double t_cdf_quadrature(double t, int df) {
  const double log_norm = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                          0.5 * std::log(df * M_PI);
  auto pdf = [&](double u) {
    return std::exp(log_norm - 0.5 * (df + 1.0) * std::log1p(u * u / df));
  };
  const double tail = integrate(pdf, 0.0, std::fabs(t));
  return t >= 0.0 ? 0.5 + tail : 0.5 - tail;
}

// Regularized incomplete beta via integration of the beta density.
inline double ibeta_quadrature(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  auto pdf = [&](double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return std::exp(log_norm + (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u));
  };
  // Integrate over the smaller tail for accuracy near the endpoints.
  if (x <= 0.5) return integrate(pdf, 0.0, x);
  return 1.0 - integrate(pdf, x, 1.0);
}

// ---------------------------------------------------------------------------
// Definitional Pearson r in long double.

inline double pearson_definition(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  long double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const long double mx = sx / n, my = sy / n;
  long double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// ---------------------------------------------------------------------------
// Order statistics on a full sort (linear-interpolation quantile).

inline double quantile_by_sort(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double h = q * (values.size() - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Point-in-polygon by crossing count (single convex ring, no holes), plus a
// half-plane sign test that is only valid for convex polygons.

inline bool ray_cast_contains(const std::vector<std::array<double, 2>>& ring,
                              std::array<double, 2> p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a[1] > p[1]) != (b[1] > p[1])) {
      const double x_at = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0];
      if (p[0] < x_at) inside = !inside;
    }
  }
  return inside;
}

inline bool convex_sign_contains(const std::vector<std::array<double, 2>>& ring,
                                 std::array<double, 2> p) {
  int sign = 0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % n];
    const double cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if (cross == 0.0) continue;  // on the supporting line
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0)
      sign = s;
    else if (s != sign)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Seeded random design helpers.

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo,
                                         double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Matrix random_design(std::mt19937_64& rng, std::size_t n, std::size_t p,
                            bool with_intercept) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix x(n, std::vector<double>(p));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) x[i][j] = dist(rng);
    if (with_intercept) x[i][p - 1] = 1.0;
  }
  return x;
}

}  // namespace oracle
