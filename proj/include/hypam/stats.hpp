#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace hypam::stats {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased

  double stderr_of_mean() const { return n > 0 ? std::sqrt(variance / static_cast<double>(n)) : 0.0; }
};

inline Summary summarize(std::span<const double> x) {
  Summary s;
  s.n = x.size();
  if (s.n == 0) return s;
  // Two-pass keeps the result independent of summation tricks.
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.variance = ss / static_cast<double>(s.n - 1);
  }
  return s;
}

/// log(sum_i exp(x_i))
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

inline double log_mean_exp(std::span<const double> x) {
  return log_sum_exp(x) - std::log(static_cast<double>(x.size()));
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

struct ChiSquare {
  double statistic;
  double p_value;
  std::size_t dof;
};

/// Pearson goodness of fit of bin counts against bin probabilities.
inline ChiSquare chi_square_test(std::span<const std::size_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size() || counts.size() < 2) {
    throw std::invalid_argument("chi_square_test: need >= 2 matching bins");
  }
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  double stat = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = n * probs[k];
    const double diff = static_cast<double>(counts[k]) - e;
    stat += diff * diff / e;
  }
  const std::size_t dof = counts.size() - 1;
  boost::math::chi_squared dist(static_cast<double>(dof));
  return {stat, boost::math::cdf(boost::math::complement(dist, stat)), dof};
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Weighted least squares y ~ a + b x. Empty weights means unit weights.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w = {}) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need >= 2 points");
  if (!w.empty() && w.size() != x.size()) throw std::invalid_argument("linear_fit: weight size mismatch");
  auto wt = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += wt(i);
    sx += wt(i) * x[i];
    sy += wt(i) * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += wt(i) * (x[i] - mx) * (x[i] - mx);
    sxy += wt(i) * (x[i] - mx) * (y[i] - my);
    syy += wt(i) * (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit: regressor has no spread");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += wt(i) * r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

/// Trapezoid rule on a (possibly non-uniform) grid.
inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

}  // namespace hypam::stats
