#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "random.hpp"

namespace mfwf {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double stderr_ = 0.0;
};

inline Summary summarize(std::span<const double> xs) {
  Summary out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  out.mean = mean;
  out.variance = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
  out.stderr_ = std::sqrt(out.variance / static_cast<double>(xs.size()));
  return out;
}

/// Standard error of the unbiased sample variance, from the fourth central moment.
inline double variance_se(std::span<const double> xs) {
  if (xs.size() < 4) throw std::invalid_argument("variance_se: need >= 4 samples");
  Summary s = summarize(xs);
  double n = static_cast<double>(xs.size());
  double m4 = 0.0;
  for (double x : xs) m4 += std::pow(x - s.mean, 4);
  m4 /= n;
  double v = (m4 - s.variance * s.variance * (n - 3.0) / (n - 1.0)) / n;
  return std::sqrt(std::max(v, 0.0));
}

inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(xs.begin(), xs.end());
  double pos = p * static_cast<double>(xs.size() - 1);
  std::size_t i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= xs.size()) return xs.back();
  double w = pos - static_cast<double>(i);
  return xs[i] + w * (xs[i + 1] - xs[i]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;  // ordinary least-squares standard error
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need >= 2 paired points");
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return fit;
}

/// Bootstrap standard error of a statistic of one sample.
template <class Stat>
double bootstrap_se(const std::vector<double>& xs, Stat stat, int resamples, Stream& rng) {
  if (xs.empty() || resamples < 2) throw std::invalid_argument("bootstrap_se: need data and >= 2 resamples");
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> buf(xs.size());
  for (int b = 0; b < resamples; ++b) {
    for (auto& v : buf) v = xs[pick(rng)];
    values.push_back(stat(buf));
  }
  return std::sqrt(summarize(values).variance);
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  std::size_t n = std::max(p.size(), q.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = i < p.size() ? p[i] : 0.0;
    double b = i < q.size() ? q[i] : 0.0;
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

inline double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("correlation: need >= 2 paired points");
  Summary sx = summarize(x), sy = summarize(y);
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += (x[i] - sx.mean) * (y[i] - sy.mean);
  cov /= static_cast<double>(x.size() - 1);
  return cov / std::sqrt(sx.variance * sy.variance);
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace mfwf
