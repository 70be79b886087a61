#pragma once

// Numerics shared by the experiment code: summary statistics, normal and
// chi-square tails, Kolmogorov-Smirnov, bootstrap resampling, isotonic
// regression, least squares, and a deterministic parallel trial loop.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include "kcm/rng.hpp"

namespace kcm {

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

// Unbiased sample variance.
inline double variance(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("variance needs n >= 2");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / (xs.size() - 1);
}

inline double std_error_of_mean(const std::vector<double>& xs) {
  return std::sqrt(variance(xs) / xs.size());
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// Inverse standard normal CDF (Acklam's rational approximation, refined by
// one Halley step; absolute error far below statistical noise here).
inline double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0)
    throw std::invalid_argument("normal_quantile needs p in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double u = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  } else if (p <= 1.0 - plow) {
    const double u = p - 0.5, r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double u = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

// Survival function of the Kolmogorov distribution.
inline double kolmogorov_sf(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term =
        2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

struct KsResult {
  double d;        // sup-norm distance to the reference CDF
  double p_value;  // asymptotic, with the small-sample correction factor
};

// One-sample KS test against the standard normal.
inline KsResult ks_test_normal(std::vector<double> xs) {
  const std::size_t n = xs.size();
  if (n < 10) throw std::invalid_argument("ks_test_normal needs n >= 10");
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  const double sn = std::sqrt(static_cast<double>(n));
  return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)};
}

namespace detail {

// Regularized upper incomplete gamma Q(a,x) (series / continued fraction).
inline double gammq(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gammq domain");
  if (x == 0.0) return 1.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-14) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-14) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace detail

// Upper-tail p-value of a chi-square statistic.
inline double chi_square_sf(double stat, double dof) {
  return detail::gammq(dof / 2.0, stat / 2.0);
}

// Nonincreasing isotonic fit by pool-adjacent-violators.
inline std::vector<double> isotonic_nonincreasing(const std::vector<double>& ys) {
  std::vector<double> level;
  std::vector<double> weight;
  for (double y : ys) {
    level.push_back(y);
    weight.push_back(1.0);
    while (level.size() > 1 && level[level.size() - 2] < level.back()) {
      const double w = weight[level.size() - 2] + weight.back();
      const double v = (level[level.size() - 2] * weight[level.size() - 2] +
                        level.back() * weight.back()) /
                       w;
      level.pop_back();
      weight.pop_back();
      level.back() = v;
      weight.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(ys.size());
  for (std::size_t i = 0; i < level.size(); ++i)
    out.insert(out.end(), static_cast<std::size_t>(weight[i]), level[i]);
  return out;
}

struct LineFit {
  double slope;
  double intercept;
};

inline LineFit least_squares(const std::vector<double>& xs,
                             const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("least_squares needs matched n >= 2");
  const double mx = mean(xs), my = mean(ys);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("degenerate abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

struct BootstrapResult {
  double estimate;       // plug-in statistic of the full sample
  double bias_corrected; // 2 * estimate - mean of resampled statistics
  double ci_lo, ci_hi;   // percentile interval of the resampled statistics
};

// Nonparametric bootstrap of a statistic of one i.i.d. sample.
inline BootstrapResult bootstrap(
    const std::vector<double>& sample,
    const std::function<double(const std::vector<double>&)>& statistic,
    int resamples, std::uint64_t seed, double level = 0.95) {
  if (sample.empty() || resamples < 10)
    throw std::invalid_argument("bootstrap needs data and resamples >= 10");
  const std::size_t n = sample.size();
  const double est = statistic(sample);
  std::vector<double> stats(resamples);
  std::vector<double> re(n);
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t u =
          counter_bits(seed, static_cast<std::int64_t>(b), i);
      re[i] = sample[u % n];
    }
    stats[b] = statistic(re);
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  auto pct = [&](double p) {
    const double idx = p * (resamples - 1);
    const std::size_t k = static_cast<std::size_t>(idx);
    const double f = idx - k;
    return k + 1 < stats.size() ? stats[k] * (1.0 - f) + stats[k + 1] * f
                                : stats.back();
  };
  const double boot_mean = mean(stats);
  return {est, 2.0 * est - boot_mean, pct(alpha), pct(1.0 - alpha)};
}

// Runs fn(i) for i in [0, n) across `jobs` threads. Work is split into fixed
// contiguous blocks, so results are a pure function of i regardless of jobs.
inline void parallel_for(std::size_t n, int jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t chunk = std::max<std::size_t>(1, n / (4 * jobs));
  auto worker = [&] {
    for (;;) {
      const std::size_t start = next.fetch_add(chunk);
      if (start >= n) return;
      const std::size_t stop = std::min(n, start + chunk);
      for (std::size_t i = start; i < stop; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Total variation distance between two probability vectors.
inline double tv_distance(const std::vector<double>& a,
                          const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace kcm
