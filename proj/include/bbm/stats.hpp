#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bbm/errors.hpp"

namespace bbm {

// Small fitting/summary helpers shared by the solvers and the harness.

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// q-quantile of a sample (linear interpolation between order statistics).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw validation_error("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double w = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[lo + 1] * w;
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares y = a + b x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw validation_error("linear_fit: need >= 2 points, equal lengths");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw numerical_error("linear_fit: degenerate regressor");
  LinearFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

struct TwoRegressorFit {
  double c0 = 0.0;  // intercept
  double c1 = 0.0;  // coefficient of x1
  double c2 = 0.0;  // coefficient of x2
};

// Least squares y = c0 + c1 x1 + c2 x2 via the 3x3 normal equations.
inline TwoRegressorFit fit_two_regressors(std::span<const double> x1,
                                          std::span<const double> x2,
                                          std::span<const double> y) {
  if (x1.size() != x2.size() || x1.size() != y.size() || x1.size() < 3)
    throw validation_error("fit_two_regressors: need >= 3 points, equal lengths");
  double a[3][3] = {};
  double b[3] = {};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r[3] = {1.0, x1[i], x2[i]};
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) a[p][q] += r[p] * r[q];
      b[p] += r[p] * y[i];
    }
  }
  // Gaussian elimination with partial pivoting.
  int idx[3] = {0, 1, 2};
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[idx[r]][col]) > std::abs(a[idx[piv]][col])) piv = r;
    std::swap(idx[col], idx[piv]);
    const double d = a[idx[col]][col];
    if (d == 0.0) throw numerical_error("fit_two_regressors: singular normal equations");
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[idx[r]][col] / d;
      for (int q = col; q < 3; ++q) a[idx[r]][q] -= f * a[idx[col]][q];
      b[idx[r]] -= f * b[idx[col]];
    }
  }
  double sol[3];
  for (int row = 2; row >= 0; --row) {
    double s = b[idx[row]];
    for (int q = row + 1; q < 3; ++q) s -= a[idx[row]][q] * sol[q];
    sol[row] = s / a[idx[row]][row];
  }
  return {sol[0], sol[1], sol[2]};
}

// Normal-approximation 95% confidence interval for a binomial proportion.
struct BinomialCi {
  double p = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double stderr_ = 0.0;
};

inline BinomialCi binomial_ci(std::uint64_t hits, std::uint64_t trials) {
  if (trials == 0) throw validation_error("binomial_ci: zero trials");
  BinomialCi c;
  c.p = static_cast<double>(hits) / static_cast<double>(trials);
  c.stderr_ = std::sqrt(c.p * (1.0 - c.p) / static_cast<double>(trials));
  c.lo = std::max(0.0, c.p - 1.96 * c.stderr_);
  c.hi = std::min(1.0, c.p + 1.96 * c.stderr_);
  return c;
}

}  // namespace bbm
