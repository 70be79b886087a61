#pragma once

// Front statistics on the left half-line: speed/variance estimation, CLT
// checks, the law seen from the front, increment covariances, the two-front
// interval experiment, and the contact-process lower speed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcm/dynamics.hpp"
#include "kcm/stats.hpp"

namespace kcm {

struct FrontTrace {
  std::vector<double> times;
  std::vector<int> positions;
};

struct FrontSpeedEstimate {
  double v_hat = 0.0, v_se = 0.0, v_ci_lo = 0.0, v_ci_hi = 0.0;
  double s2_hat = 0.0, s2_se = 0.0, s2_ci_lo = 0.0, s2_ci_hi = 0.0;
  int trials = 0;
  double horizon = 0.0;
};

struct SpeedBounds {
  double v_lower_hat = 0.0;  // surviving-trial mean spread speed
  double v_upper = 0.0;      // configured propagation bound
  double survival_fraction = 0.0;
};

struct ExtinctionError : std::runtime_error {
  double extinction_fraction;
  explicit ExtinctionError(double f)
      : std::runtime_error("all contact trials went extinct"),
        extinction_fraction(f) {}
};

// Empirical distribution of w-site bit patterns (site 1 = lowest bit).
class EmpiricalLaw {
 public:
  explicit EmpiricalLaw(int w) : w_(w), counts_(std::size_t{1} << w, 0) {
    if (w < 1 || w > 20) throw std::invalid_argument("window width in [1,20]");
  }

  int width() const { return w_; }
  std::uint64_t total() const { return total_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  void add_pattern(std::uint32_t bits) {
    counts_.at(bits) += 1;
    total_ += 1;
  }

  // Records sites first..first+w-1 of the configuration.
  void add_window(const SpinConfig& c, int first) {
    std::uint32_t bits = 0;
    for (int i = 0; i < w_; ++i)
      bits |= static_cast<std::uint32_t>(c.value(first + i)) << i;
    add_pattern(bits);
  }

  std::vector<double> probabilities() const {
    if (total_ == 0) throw std::logic_error("law has no samples");
    std::vector<double> p(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i)
      p[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
    return p;
  }

  // Bernoulli(density) product law over the window, as a cell vector.
  static std::vector<double> product_cells(int w, double density) {
    std::vector<double> p(std::size_t{1} << w);
    for (std::size_t bits = 0; bits < p.size(); ++bits) {
      double prob = 1.0;
      for (int i = 0; i < w; ++i)
        prob *= (bits >> i & 1) ? density : 1.0 - density;
      p[bits] = prob;
    }
    return p;
  }

 private:
  int w_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct TvEstimate {
  double plug_in = 0.0;
  double corrected = 0.0;  // 2 * plug_in - bootstrap mean
  double ci_lo = 0.0, ci_hi = 0.0;
};

namespace detail {

// Multinomial resample of `total` draws from `probs`, via inverse CDF on a
// coarse guide table.
inline std::vector<double> multinomial_probs(const std::vector<double>& probs,
                                             std::uint64_t total,
                                             std::uint64_t seed,
                                             std::int64_t tag) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  std::vector<double> out(probs.size(), 0.0);
  const double unit = 1.0 / static_cast<double>(total);
  for (std::uint64_t i = 0; i < total; ++i) {
    const double u = counter_u01(seed, tag, i) * acc;
    const std::size_t cell =
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    out[std::min(cell, out.size() - 1)] += unit;
  }
  return out;
}

}  // namespace detail

// Plug-in TV with parametric-bootstrap bias correction. The plug-in value
// overshoots by roughly sum(sqrt(p_i))/(2 sqrt(N)); resampling from the
// fitted cells measures that offset so it can be subtracted.
inline TvEstimate tv_corrected(const EmpiricalLaw& a,
                               const std::vector<double>& reference,
                               bool reference_is_exact, std::uint64_t ref_total,
                               std::uint64_t seed, int resamples = 200) {
  const auto pa = a.probabilities();
  if (pa.size() != reference.size())
    throw std::invalid_argument("window width mismatch");
  const double plug_in = tv_distance(pa, reference);
  std::vector<double> boot(resamples);
  for (int b = 0; b < resamples; ++b) {
    const auto ra = detail::multinomial_probs(
        pa, a.total(), derive_seed(seed, "tv-boot-a", b), 1);
    const auto rb = reference_is_exact
                        ? reference
                        : detail::multinomial_probs(
                              reference, ref_total,
                              derive_seed(seed, "tv-boot-b", b), 2);
    boot[b] = tv_distance(ra, rb);
  }
  std::sort(boot.begin(), boot.end());
  const double boot_mean = mean(boot);
  auto pct = [&](double p) {
    return boot[std::min<std::size_t>(boot.size() - 1,
                                      static_cast<std::size_t>(p * boot.size()))];
  };
  // basic bootstrap interval around the corrected point
  return {plug_in, 2.0 * plug_in - boot_mean, 2.0 * plug_in - pct(0.975),
          2.0 * plug_in - pct(0.025)};
}

inline TvEstimate tv_corrected(const EmpiricalLaw& a, const EmpiricalLaw& b,
                               std::uint64_t seed, int resamples = 200) {
  return tv_corrected(a, b.probabilities(), false, b.total(), seed, resamples);
}

// ---------------------------------------------------------------------------
// Trial runners

// Front position at each requested time (sorted), evolving from `init`.
inline FrontTrace front_trace(const SpinConfig& init, double q,
                              std::uint64_t seed, std::vector<double> times) {
  std::sort(times.begin(), times.end());
  if (times.empty()) throw std::invalid_argument("no sample times");
  SimState st(init, ProcessKind::FA1f, SimParams{q});
  EventStream stream(seed, q, init.lo() - kGuardBand,
                     init.kind() == Boundary::LeftHalfLine ? -1 : init.hi());
  FrontTrace trace;
  trace.times = times;
  trace.positions.reserve(times.size());
  std::size_t i = 0;
  ensure_window(st, stream);
  while (i < times.size()) {
    const double next = stream.peek_time();
    while (i < times.size() && times[i] < next) {
      trace.positions.push_back(st.front());
      ++i;
    }
    if (i >= times.size()) break;
    const Event e = stream.pop();
    if (apply_event(st, e)) ensure_window(st, stream);
  }
  return trace;
}

inline int front_at(const SpinConfig& init, double q, double T,
                    std::uint64_t seed) {
  return front_trace(init, q, seed, {T}).positions.front();
}

// The three standard starting points: bare origin, origin with two extra
// zeros, and a decorated 50-site window.
inline std::vector<SpinConfig> canonical_initials() {
  auto with_zeros = SpinConfig::half_line(-20, std::string(20, '1'));
  with_zeros.set(-10, 0);
  with_zeros.set(-20, 0);
  std::string decorated(50, '1');
  for (int i = 2; i < 50; i += 5) decorated[static_cast<std::size_t>(i)] = '0';
  return {SpinConfig::delta_origin(), with_zeros,
          SpinConfig::half_line(-50, decorated)};
}

// CLT window constant: the z with P(|N(0,1)| <= z) = sqrt(1-eps), scaled so
// the +-2va sqrt(.) interval captures the front fluctuation.
inline double clt_window_constant(double v_hat, double s_hat,
                                  double eps = 0.05) {
  if (v_hat <= 0.0 || s_hat < 0.0) throw std::invalid_argument("bad v or s");
  const double target = std::sqrt(1.0 - eps);
  const double z = normal_quantile((1.0 + target) / 2.0);
  return z * s_hat / (2.0 * v_hat);
}

// ---------------------------------------------------------------------------
// Estimators

inline FrontSpeedEstimate estimate_speed_variance(const SpinConfig& init,
                                                  double q, double T, int N,
                                                  std::uint64_t seed,
                                                  int jobs = 1) {
  if (N < 2) throw std::invalid_argument("need at least two trials");
  if (init.kind() != Boundary::LeftHalfLine)
    throw std::domain_error("speed estimation runs on the left half-line");
  std::vector<double> disp(static_cast<std::size_t>(N));
  const int x0 = front(init);
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t i) {
    const auto s = derive_seed(seed, "front-speed", i);
    disp[i] = static_cast<double>(front_at(init, q, T, s) - x0);
  });
  FrontSpeedEstimate est;
  est.trials = N;
  est.horizon = T;
  est.v_hat = -mean(disp) / T;
  est.v_se = std_error_of_mean(disp) / T;
  est.s2_hat = variance(disp) / T;

  const auto bv = bootstrap(
      disp, [T](const std::vector<double>& s) { return -mean(s) / T; }, 1000,
      derive_seed(seed, "front-speed-bv", 0));
  est.v_ci_lo = bv.ci_lo;
  est.v_ci_hi = bv.ci_hi;
  const auto bs = bootstrap(
      disp, [T](const std::vector<double>& s) { return variance(s) / T; },
      1000, derive_seed(seed, "front-speed-bs", 0));
  est.s2_ci_lo = bs.ci_lo;
  est.s2_ci_hi = bs.ci_hi;
  est.s2_se = (bs.ci_hi - bs.ci_lo) / (2.0 * 1.96);
  return est;
}

struct CltResult {
  double ks_d = 0.0;
  double p_value = 0.0;
  bool degenerate_branch = false;
  double concentration = 0.0;  // P(|X_T + vT| <= a sqrt(T)) when degenerate
  std::vector<double> standardized;
};

inline CltResult clt_test(const SpinConfig& init, double q, double T, int N,
                          std::uint64_t seed, double v_hat, double s_hat,
                          bool degenerate, int jobs = 1) {
  // center on the displacement so starts with an off-origin front line up
  const int x0 = front(init);
  std::vector<double> xT(static_cast<std::size_t>(N));
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t i) {
    const auto s = derive_seed(seed, "clt", i);
    xT[i] = static_cast<double>(front_at(init, q, T, s) - x0);
  });
  CltResult r;
  if (degenerate || s_hat <= 0.0) {
    r.degenerate_branch = true;
    const double a = 2.0;
    int inside = 0;
    for (double x : xT)
      if (std::abs(x + v_hat * T) <= a * std::sqrt(T)) inside += 1;
    r.concentration = static_cast<double>(inside) / N;
    return r;
  }
  r.standardized.reserve(xT.size());
  for (double x : xT)
    r.standardized.push_back((x + v_hat * T) / (s_hat * std::sqrt(T)));
  const auto ks = ks_test_normal(r.standardized);
  r.ks_d = ks.d;
  r.p_value = ks.p_value;
  return r;
}

// Law of the w sites just right of the front at each requested time, pooled
// over N independent trials.
inline std::vector<EmpiricalLaw> behind_front_laws(
    const SpinConfig& init, double q, const std::vector<double>& times, int w,
    int N, std::uint64_t seed, double v_lower_hint = 0.25, int jobs = 1) {
  if (w > 20) throw std::domain_error("window too wide");
  for (double t : times)
    if (t * v_lower_hint <= w)
      throw std::domain_error("window does not fit the travelled distance");
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::vector<std::uint32_t>> patterns(
      static_cast<std::size_t>(N));
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t i) {
    const auto s = derive_seed(seed, "behind-front", i);
    SimState st(init, ProcessKind::FA1f, SimParams{q});
    EventStream stream(s, q, init.lo() - kGuardBand, -1);
    std::size_t k = 0;
    std::vector<std::uint32_t>& mine = patterns[i];
    ensure_window(st, stream);
    while (k < sorted.size()) {
      const double next = stream.peek_time();
      while (k < sorted.size() && sorted[k] < next) {
        const int X = st.front();
        std::uint32_t bits = 0;
        for (int j = 0; j < w; ++j)
          bits |= static_cast<std::uint32_t>(st.config.value(X + 1 + j)) << j;
        mine.push_back(bits);
        ++k;
      }
      if (k >= sorted.size()) break;
      if (apply_event(st, stream.pop())) ensure_window(st, stream);
    }
  });
  std::vector<EmpiricalLaw> laws(sorted.size(), EmpiricalLaw(w));
  for (const auto& mine : patterns)
    for (std::size_t k = 0; k < mine.size(); ++k) laws[k].add_pattern(mine[k]);
  return laws;
}

struct LagCovariance {
  int lag;
  double cov;
  double se;
};

inline std::vector<LagCovariance> increment_covariance(
    const SpinConfig& init, double q, const std::vector<int>& lags, int N,
    std::uint64_t seed, int jobs = 1, int burn_in = 50, int span = 150) {
  for (int lag : lags)
    if (lag < 0) throw std::invalid_argument("lags must be >= 0");
  const int max_lag = lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());
  const int T = burn_in + span + max_lag;
  std::vector<double> times(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) times[static_cast<std::size_t>(t)] = t;
  // per trial, time-averaged centered products over k in [burn_in, burn_in+span)
  std::vector<std::vector<double>> per_trial(
      lags.size(), std::vector<double>(static_cast<std::size_t>(N)));
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t i) {
    const auto s = derive_seed(seed, "increments", i);
    const auto trace = front_trace(init, q, s, times);
    std::vector<double> xi(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t)
      xi[static_cast<std::size_t>(t - 1)] = static_cast<double>(
          trace.positions[static_cast<std::size_t>(t)] -
          trace.positions[static_cast<std::size_t>(t - 1)]);
    double m = 0.0;
    for (int k = burn_in; k < burn_in + span + max_lag; ++k)
      m += xi[static_cast<std::size_t>(k)];
    m /= span + max_lag;
    for (std::size_t li = 0; li < lags.size(); ++li) {
      double acc = 0.0;
      for (int k = burn_in; k < burn_in + span; ++k)
        acc += (xi[static_cast<std::size_t>(k)] - m) *
               (xi[static_cast<std::size_t>(k + lags[li])] - m);
      per_trial[li][i] = acc / span;
    }
  });
  std::vector<LagCovariance> out;
  for (std::size_t li = 0; li < lags.size(); ++li)
    out.push_back({lags[li], mean(per_trial[li]),
                   std_error_of_mean(per_trial[li])});
  return out;
}

// ---------------------------------------------------------------------------
// Two-front experiment on an interval cluster

struct TwoFrontReport {
  double tau = 0.0;        // first time the zero gap is <= the stop threshold
  int x_tau = 0, y_tau = 0;
  bool r_event_held = true;  // neither front crossed the midpoint early
  bool h_behind_left = false, h_behind_right = false;
  FrontTrace left, right;  // sampled at unit times
};

namespace detail {

inline int rightmost_zero_leq(const SpinConfig& c, int x) {
  for (int y = x; y >= 1; --y)
    if (c.value(y) == 0) return y;
  return 0;  // frozen boundary
}

inline int leftmost_zero_geq(const SpinConfig& c, int x) {
  for (int y = x; y <= c.length(); ++y)
    if (c.value(y) == 0) return y;
  return c.length() + 1;  // frozen boundary
}

}  // namespace detail

// Tracks the two inward-moving fronts of a single occupied cluster until
// their gap first drops to `stop_gap`. `ell` is the zero-spacing scale used
// for the trailing-region membership checks at that moment.
inline TwoFrontReport two_front_trace(const SpinConfig& init, double q,
                                      std::uint64_t seed, int stop_gap,
                                      int ell) {
  if (init.kind() != Boundary::Interval)
    throw std::domain_error("two_front_trace needs an Interval config");
  const auto dec = cluster_decomposition(init, 1);
  if (dec.p != 1)
    throw std::domain_error("configuration must hold exactly one cluster");
  const auto [x0, y0] = dec.clusters.front();
  const int M = (x0 + y0) / 2;
  TwoFrontReport rep;
  SimState st(init, ProcessKind::FA1f, SimParams{q});
  EventStream stream(seed, q, 1, init.length());
  int X = detail::rightmost_zero_leq(st.config, M);
  int Y = detail::leftmost_zero_geq(st.config, std::max(M, X + 1));
  double next_sample = 0.0;
  auto sample = [&](double upto) {
    while (next_sample < upto) {
      rep.left.times.push_back(next_sample);
      rep.left.positions.push_back(X);
      rep.right.times.push_back(next_sample);
      rep.right.positions.push_back(Y);
      next_sample += 1.0;
    }
  };
  while (Y - X > stop_gap) {
    const Event e = stream.pop();
    sample(e.time);
    if (!apply_event(st, e)) continue;
    const int s = e.site;
    if (st.config.value(s) == 0) {
      // the interior (X, Y) holds no zero, so a fresh one can only sit
      // right next to a front; that makes the attribution unambiguous
      if (s == X + 1) X = s;
      else if (s == Y - 1) Y = s;
    } else {
      if (s == X) X = detail::rightmost_zero_leq(st.config, X);
      if (s == Y) Y = detail::leftmost_zero_geq(st.config, Y);
    }
    // crossing the midpoint counts only while the fronts are still apart
    if (Y - X > stop_gap && (X > M - 1 || Y < M + 1)) rep.r_event_held = false;
    rep.tau = e.time;
  }
  rep.x_tau = X;
  rep.y_tau = Y;
  rep.h_behind_left = in_H(st.config, x0, X, ell);
  rep.h_behind_right = in_H(st.config, Y, y0, ell);
  return rep;
}

// ---------------------------------------------------------------------------
// Contact-process spread speed

inline SpeedBounds contact_spread_speed(double q, double T, int N,
                                        std::uint64_t seed, int jobs = 1) {
  std::vector<double> disp(static_cast<std::size_t>(N),
                           std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t i) {
    const auto s = derive_seed(seed, "contact-speed", i);
    SimState st(SpinConfig::full_line(0, "0"), ProcessKind::ThresholdContact,
                SimParams{q});
    EventStream stream(s, q, -kGuardBand, kGuardBand);
    try {
      evolve(st, stream, T);
    } catch (const WindowCapError&) {
      return;  // treated as a lost trial below
    }
    if (st.has_empty())
      disp[i] = static_cast<double>(-st.min_zero);
  });
  std::vector<double> surviving;
  for (double d : disp)
    if (!std::isnan(d)) surviving.push_back(d);
  SpeedBounds b;
  b.survival_fraction = static_cast<double>(surviving.size()) / N;
  if (surviving.empty()) throw ExtinctionError(1.0);
  b.v_lower_hat = mean(surviving) / T;
  return b;
}

}  // namespace kcm
