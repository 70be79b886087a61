#pragma once

// Exact small-L chain analysis plus windowed Monte Carlo machinery for
// total-variation profiles: mixing curves, cutoff location and window,
// the all-ones lower-bound witness, and empty-site coverage experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcm/dynamics.hpp"
#include "kcm/frontlab.hpp"
#include "kcm/lattice.hpp"
#include "kcm/stats.hpp"

namespace kcm {

// ---------------------------------------------------------------------------
// Exact generator on Interval(L) with frozen boundary zeros.
//
// States are bit masks with bit i-1 = site i (1 = occupied). The full dense
// matrix is only materialized on demand; rates are recomputed from bits, so
// the representation stays O(2^L) and L = 14 remains tractable.

class GeneratorMatrix {
 public:
  GeneratorMatrix(int L, double q) : L_(L), q_(q) {
    if (L < 1 || L > 14)
      throw std::length_error("exact solver capped at L = 14");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("q out of [0,1]");
    exit_.resize(std::size_t{1} << L);
    for (std::uint32_t s = 0; s < exit_.size(); ++s) {
      double total = 0.0;
      for (int x = 1; x <= L; ++x) total += rate(s, x);
      exit_[s] = total;
    }
  }

  int L() const { return L_; }
  double q() const { return q_; }
  std::size_t states() const { return exit_.size(); }
  double exit_rate(std::uint32_t s) const { return exit_[s]; }
  double max_exit_rate() const {
    return *std::max_element(exit_.begin(), exit_.end());
  }

  // Rate of flipping site x (1-based) from state s. Boundary sites see the
  // frozen zeros at 0 and L+1, so they are always unconstrained.
  double rate(std::uint32_t s, int x) const {
    const int left = (x > 1) ? (s >> (x - 2)) & 1 : 0;
    const int right = (x < L_) ? (s >> x) & 1 : 0;
    if (left && right) return 0.0;
    return ((s >> (x - 1)) & 1) ? q_ : 1.0 - q_;
  }

  // Q[s][t]: off-diagonal flip rates, diagonal = -exit rate.
  double entry(std::uint32_t s, std::uint32_t t) const {
    if (s == t) return -exit_[s];
    const std::uint32_t diff = s ^ t;
    if ((diff & (diff - 1)) != 0) return 0.0;  // more than one site differs
    int x = 1;
    while (!((diff >> (x - 1)) & 1)) ++x;
    return rate(s, x);
  }

  std::vector<std::vector<double>> dense() const {
    if (L_ > 10) throw std::length_error("dense form capped at L = 10");
    std::vector<std::vector<double>> Q(states(),
                                       std::vector<double>(states(), 0.0));
    for (std::uint32_t s = 0; s < states(); ++s)
      for (std::uint32_t t = 0; t < states(); ++t) Q[s][t] = entry(s, t);
    return Q;
  }

  // out = in * (I + Q/lambda), the uniformized one-step kernel.
  void apply_uniformized(const std::vector<double>& in,
                         std::vector<double>& out, double lambda) const {
    out.assign(in.size(), 0.0);
    for (std::uint32_t s = 0; s < in.size(); ++s) {
      const double mass = in[s];
      if (mass == 0.0) continue;
      out[s] += mass * (1.0 - exit_[s] / lambda);
      for (int x = 1; x <= L_; ++x) {
        const double r = rate(s, x);
        if (r > 0.0) out[s ^ (1u << (x - 1))] += mass * r / lambda;
      }
    }
  }

  // Bernoulli(1-q) product weights over the state space.
  std::vector<double> stationary() const {
    std::vector<double> mu(states());
    const double p = 1.0 - q_;
    for (std::uint32_t s = 0; s < states(); ++s) {
      double m = 1.0;
      for (int x = 1; x <= L_; ++x) m *= ((s >> (x - 1)) & 1) ? p : 1.0 - p;
      mu[s] = m;
    }
    return mu;
  }

 private:
  int L_;
  double q_;
  std::vector<double> exit_;
};

inline GeneratorMatrix build_generator(int L, double q) {
  return GeneratorMatrix(L, q);
}

// Max detailed-balance residual |mu(s) Q[s][s^x] - mu(s^x) Q[s^x][s]|.
inline double stationary_check(const GeneratorMatrix& G) {
  const auto mu = G.stationary();
  double worst = 0.0;
  for (std::uint32_t s = 0; s < G.states(); ++s)
    for (int x = 1; x <= G.L(); ++x) {
      const std::uint32_t t = s ^ (1u << (x - 1));
      worst = std::max(worst,
                       std::abs(mu[s] * G.rate(s, x) - mu[t] * G.rate(t, x)));
    }
  return worst;
}

namespace detail {

inline std::uint32_t state_of(const SpinConfig& c, int L) {
  if (c.kind() != Boundary::Interval || c.length() != L)
    throw std::invalid_argument("start must be an Interval(L) config");
  std::uint32_t s = 0;
  for (int x = 1; x <= L; ++x)
    s |= static_cast<std::uint32_t>(c.value(x)) << (x - 1);
  return s;
}

}  // namespace detail

// Exact ||delta_{sigma0} e^{tQ} - mu||_TV by uniformization: Poisson(lambda t)
// mixture of powers of I + Q/lambda, truncated when the remaining Poisson
// mass drops below 1e-12.
inline double tv_exact(const GeneratorMatrix& G, const SpinConfig& sigma0,
                       double t) {
  if (t < 0.0) throw std::invalid_argument("t must be >= 0");
  const auto mu = G.stationary();
  std::vector<double> pi(G.states(), 0.0);
  pi[detail::state_of(sigma0, G.L())] = 1.0;

  const double lambda = G.max_exit_rate();
  const double lt = lambda * t;
  std::vector<double> acc(G.states(), 0.0);
  if (lt > 0.0) {
    std::vector<double> next(G.states());
    double log_pmf = -lt;  // log Poisson(lt) pmf at k = 0
    double covered = 0.0;
    for (int k = 0; covered < 1.0 - 1e-12; ++k) {
      if (k > 0) {
        log_pmf += std::log(lt / k);
        G.apply_uniformized(pi, next, lambda);
        pi.swap(next);
      }
      const double pmf = std::exp(log_pmf);
      covered += pmf;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += pmf * pi[i];
    }
  } else {
    acc = pi;
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < acc.size(); ++i) tv += std::abs(acc[i] - mu[i]);
  return 0.5 * tv;
}

// Start maximizing tv_exact at time t; diagnostic only.
inline std::uint32_t worst_start(const GeneratorMatrix& G, double t) {
  std::uint32_t best = 0;
  double best_tv = -1.0;
  for (std::uint32_t s = 0; s < G.states(); ++s) {
    std::string bits(static_cast<std::size_t>(G.L()), '0');
    for (int x = 1; x <= G.L(); ++x)
      if ((s >> (x - 1)) & 1) bits[static_cast<std::size_t>(x - 1)] = '1';
    const double tv = tv_exact(G, SpinConfig::interval(G.L(), bits), t);
    if (tv > best_tv) {
      best_tv = tv;
      best = s;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Windowed Monte Carlo TV estimation

struct TVProfile {
  std::vector<double> times;
  std::vector<double> tv;        // corrected estimate (or exact value)
  std::vector<double> ci_lo, ci_hi;
  std::vector<double> isotonic;  // nonincreasing fit of tv (estimate mode)
  bool exact = false;
  int L = 0;
  double q = 0.0;
  int w = 0;
  int N = 0;
  std::string start;
};

namespace detail {

// One trajectory per trial; the pattern of the window [first, first+w-1] is
// recorded at every grid time. Patterns are a pure function of the trial
// index, so the trial loop parallelizes safely.
inline std::vector<EmpiricalLaw> window_laws(double q, int L,
                                             const SpinConfig& sigma0,
                                             const std::vector<double>& grid,
                                             int w, int N, std::uint64_t seed,
                                             int jobs) {
  if (w < 1 || w > 12) throw std::invalid_argument("window width in [1,12]");
  if (w > L) throw std::invalid_argument("window wider than the interval");
  if (static_cast<std::uint64_t>(N) < 10ull << w)
    throw std::invalid_argument("N must be at least 10 * 2^w");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("time grid must be sorted");
  if (sigma0.kind() != Boundary::Interval || sigma0.length() != L)
    throw std::invalid_argument("start must be an Interval(L) config");
  const int first = (L - w) / 2 + 1;
  const double horizon = grid.empty() ? 0.0 : grid.back();

  std::vector<std::vector<std::uint32_t>> patterns(
      static_cast<std::size_t>(N));
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t trial) {
    SimState st(sigma0, ProcessKind::FA1f, SimParams{q});
    EventStream stream(derive_seed(seed, "mixing", static_cast<int>(trial)), q,
                       1, L);
    const auto traj = evolve(st, stream, horizon, grid);
    auto& row = patterns[trial];
    row.reserve(traj.snapshots.size());
    for (const auto& snap : traj.snapshots) {
      std::uint32_t bits = 0;
      for (int i = 0; i < w; ++i)
        bits |= static_cast<std::uint32_t>(snap.value(first + i)) << i;
      row.push_back(bits);
    }
  });

  std::vector<EmpiricalLaw> laws(grid.size(), EmpiricalLaw(w));
  for (const auto& row : patterns)
    for (std::size_t i = 0; i < row.size(); ++i) laws[i].add_pattern(row[i]);
  return laws;
}

}  // namespace detail

// TV between the law of the central w-site window at time t and the exact
// Bernoulli(1-q) product marginal. A lower bound on the full TV (projection
// contracts TV); the plug-in bias is removed by the bootstrap correction.
inline TvEstimate tv_window_estimate(double q, int L, const SpinConfig& sigma0,
                                     double t, int w, int N,
                                     std::uint64_t seed, int jobs = 1) {
  const auto laws = detail::window_laws(q, L, sigma0, {t}, w, N, seed, jobs);
  return tv_corrected(laws[0], EmpiricalLaw::product_cells(w, 1.0 - q), true,
                      0, derive_seed(seed, "tv-window", 0));
}

inline TVProfile mixing_profile(double q, int L, const SpinConfig& sigma0,
                                const std::vector<double>& grid, int w, int N,
                                std::uint64_t seed, int jobs = 1) {
  const auto laws = detail::window_laws(q, L, sigma0, grid, w, N, seed, jobs);
  const auto ref = EmpiricalLaw::product_cells(w, 1.0 - q);
  TVProfile out;
  out.times = grid;
  out.L = L;
  out.q = q;
  out.w = w;
  out.N = N;
  out.start = sigma0.to_literal();
  for (std::size_t i = 0; i < laws.size(); ++i) {
    const auto tv = tv_corrected(laws[i], ref, true, 0,
                                 derive_seed(seed, "tv-window", static_cast<int>(i)));
    out.tv.push_back(std::clamp(tv.corrected, 0.0, 1.0));
    out.ci_lo.push_back(tv.ci_lo);
    out.ci_hi.push_back(tv.ci_hi);
  }
  out.isotonic = isotonic_nonincreasing(out.tv);
  return out;
}

struct HorizonError : std::runtime_error {
  double threshold;
  explicit HorizonError(double eps)
      : std::runtime_error("profile never crosses threshold " +
                           std::to_string(eps) +
                           " within the simulated horizon"),
        threshold(eps) {}
};

// First grid time where the isotonic profile reaches eps, by linear inverse
// interpolation; ties resolve to the earliest time.
inline double threshold_crossing(const TVProfile& profile, double eps) {
  const auto& ys = profile.isotonic.empty() ? profile.tv : profile.isotonic;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (ys[i] > eps) continue;
    if (i == 0) return profile.times[0];
    const double y0 = ys[i - 1], y1 = ys[i];
    if (y0 == y1) return profile.times[i];
    const double f = (y0 - eps) / (y0 - y1);
    return profile.times[i - 1] + f * (profile.times[i] - profile.times[i - 1]);
  }
  throw HorizonError(eps);
}

// ---------------------------------------------------------------------------
// Cutoff experiment

struct CutoffEntry {
  int L = 0;
  double t_75 = 0.0, t_50 = 0.0, t_25 = 0.0;  // t_mix at eps 0.75/0.5/0.25
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;        // reference time scales
  TVProfile profile;
};

struct CutoffReport {
  std::vector<CutoffEntry> entries;
  double slope = 0.0;            // of t_mix(0.5) vs L
  double slope_target = 0.0;     // 1 / (2 v_hat)
  double window_exponent = 0.0;  // log-log fit of t_25 - t_75 vs L
  double v_hat = 0.0;
  double a = 0.0;
};

struct CutoffParams {
  double q = 0.9;
  int w = 10;
  int N = 0;  // trials per L; defaults to 10 * 2^w when 0
  double v_hat = 0.0;        // front speed, from the front experiments
  double v_lower_hat = 0.25; // spread speed floor, for t1/t2
  double a = 0.0;            // CLT window constant
  double delta = 0.1;
  int jobs = 1;
};

// All-ones start per L: profile on a sqrt(L)-spaced grid bracketing
// L / (2 v_hat), threshold times by inverse interpolation, then linear and
// log-log fits across L.
inline CutoffReport cutoff_experiment(const std::vector<int>& Ls,
                                      const CutoffParams& par,
                                      std::uint64_t seed) {
  if (Ls.size() < 3)
    throw std::invalid_argument("cutoff fit needs at least 3 values of L");
  if (par.v_hat <= 0.0) throw std::invalid_argument("v_hat must be positive");
  CutoffReport rep;
  rep.v_hat = par.v_hat;
  rep.a = par.a;
  rep.slope_target = 1.0 / (2.0 * par.v_hat);

  std::vector<double> xs, t50, logL, logw;
  for (std::size_t li = 0; li < Ls.size(); ++li) {
    const int L = Ls[li];
    const double mid = L / (2.0 * par.v_hat);
    const double root = std::sqrt(static_cast<double>(L));
    std::vector<double> grid;
    for (double t = std::max(0.0, mid - 5.0 * root); t <= mid + 8.0 * root;
         t += root / 2.0)
      grid.push_back(t);
    const int N = par.N > 0 ? par.N : 10 << par.w;
    CutoffEntry e;
    e.L = L;
    e.profile = mixing_profile(par.q, L, SpinConfig::interval_filled(L, 1),
                               grid, par.w, N,
                               derive_seed(seed, "cutoff", static_cast<int>(li)),
                               par.jobs);
    e.t_75 = threshold_crossing(e.profile, 0.75);
    e.t_50 = threshold_crossing(e.profile, 0.5);
    e.t_25 = threshold_crossing(e.profile, 0.25);
    // reference scales for the all-ones start (largest cluster = L)
    const double B = static_cast<double>(L);
    e.t1 = std::max(B, std::pow(std::log(B), 9.0)) / par.v_lower_hat;
    e.t2 = B / (2.0 * par.v_hat) +
           par.a / (par.v_lower_hat * par.delta) * std::sqrt(B);
    e.t3 = B / (2.0 * par.v_hat) - par.a / par.v_hat * std::sqrt(B);
    xs.push_back(B);
    t50.push_back(e.t_50);
    logL.push_back(std::log(B));
    logw.push_back(std::log(std::max(e.t_25 - e.t_75, 1e-9)));
    rep.entries.push_back(std::move(e));
  }
  rep.slope = least_squares(xs, t50).slope;
  rep.window_exponent = least_squares(logL, logw).slope;
  return rep;
}

// ---------------------------------------------------------------------------
// Lower-bound witness

struct WitnessReport {
  double t = 0.0;          // witness time
  int window_lo = 0, window_hi = 0;
  double p_hat = 0.0;      // P(window all ones at t)
  double se = 0.0;
  double mu_mass = 0.0;    // exact stationary mass of the all-ones window
  double certificate = 0.0;  // p_hat - mu_mass, a lower bound on d(t)
};

// All-ones start on Interval(L). The two boundary fronts need about
// L / (2v) to meet in the middle, so a bit earlier, at
// t = L/(2v) - (offset_scale * a / v) sqrt(L), the central window of
// half-width a sqrt(L) is still all ones with high probability while its
// stationary mass is (1-q)^{window}.
inline WitnessReport lower_bound_witness(double q, int L, double a,
                                         double v_hat, int N,
                                         std::uint64_t seed, int jobs = 1,
                                         double offset_scale = 2.0) {
  if (a < 0.0) throw std::invalid_argument("a must be >= 0");
  if (v_hat <= 0.0) throw std::invalid_argument("v_hat must be positive");
  const double root = std::sqrt(static_cast<double>(L));
  const double t = L / (2.0 * v_hat) - offset_scale * a / v_hat * root;
  if (t < 0.0) throw std::domain_error("witness time is negative");
  const double M = (L + 1) / 2.0;
  WitnessReport rep;
  rep.t = t;
  rep.window_lo = static_cast<int>(std::ceil(M - a * root));
  rep.window_hi = static_cast<int>(std::floor(M + a * root));

  std::vector<double> hits(static_cast<std::size_t>(N), 0.0);
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t trial) {
    SimState st(SpinConfig::interval_filled(L, 1), ProcessKind::FA1f,
                SimParams{q});
    EventStream stream(derive_seed(seed, "lower-bound", static_cast<int>(trial)),
                       q, 1, L);
    evolve(st, stream, t);
    bool all_ones = true;
    for (int x = rep.window_lo; x <= rep.window_hi && all_ones; ++x)
      all_ones = st.config.value(x) == 1;
    hits[trial] = all_ones ? 1.0 : 0.0;
  });
  rep.p_hat = mean(hits);
  rep.se = std_error_of_mean(hits);
  const int width = rep.window_hi - rep.window_lo + 1;
  rep.mu_mass = std::pow(1.0 - q, width > 0 ? width : 0);
  rep.certificate = rep.p_hat - rep.mu_mass;
  return rep;
}

// ---------------------------------------------------------------------------
// Empty-site coverage behind the front

struct ZerosTable {
  std::vector<double> ss;    // sample times
  std::vector<int> ells;     // coverage scales
  std::vector<std::vector<double>> p;   // p[si][li] = P(coverage fails)
  std::vector<std::vector<double>> se;
  double slope_ell = 0.0;  // log P vs ell at the largest s
  double slope_s = 0.0;    // log P vs s at the smallest ell
};

// Start on the left half-line with a known front. At each time s the event
// is failure of ell-coverage on [X_s, y] where X_s is the current front and
// y the initial front position.
inline ZerosTable zeros_experiment(double q, const std::vector<int>& ells,
                                   const std::vector<double>& ss,
                                   const SpinConfig& init, int N,
                                   std::uint64_t seed, int jobs = 1) {
  if (init.kind() != Boundary::LeftHalfLine)
    throw std::invalid_argument("start must live on the left half-line");
  if (!std::is_sorted(ss.begin(), ss.end()))
    throw std::invalid_argument("times must be sorted");
  const int y = init.front();
  ZerosTable out;
  out.ss = ss;
  out.ells = ells;

  std::vector<std::vector<std::uint8_t>> fails(
      static_cast<std::size_t>(N),
      std::vector<std::uint8_t>(ss.size() * ells.size(), 0));
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t trial) {
    SimState st(init, ProcessKind::FA1f, SimParams{q});
    EventStream stream(derive_seed(seed, "zeros", static_cast<int>(trial)), q,
                       init.lo() - kGuardBand, -1);
    const auto traj = evolve(st, stream, ss.empty() ? 0.0 : ss.back(), ss);
    for (std::size_t si = 0; si < traj.snapshots.size(); ++si) {
      const auto& snap = traj.snapshots[si];
      const int xs = snap.front();
      for (std::size_t li = 0; li < ells.size(); ++li)
        fails[trial][si * ells.size() + li] =
            in_H(snap, xs, y, ells[li]) ? 0 : 1;
    }
  });

  out.p.assign(ss.size(), std::vector<double>(ells.size(), 0.0));
  out.se = out.p;
  for (std::size_t si = 0; si < ss.size(); ++si)
    for (std::size_t li = 0; li < ells.size(); ++li) {
      std::vector<double> xs(static_cast<std::size_t>(N));
      for (int k = 0; k < N; ++k) xs[k] = fails[k][si * ells.size() + li];
      out.p[si][li] = mean(xs);
      out.se[si][li] = std_error_of_mean(xs);
    }

  // decay direction summaries over the strictly positive entries
  auto log_fit = [](const std::vector<double>& xs,
                    const std::vector<double>& ps) {
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ps[i] > 0.0) {
        fx.push_back(xs[i]);
        fy.push_back(std::log(ps[i]));
      }
    return fx.size() >= 2 ? least_squares(fx, fy).slope : 0.0;
  };
  if (!ss.empty() && !ells.empty()) {
    std::vector<double> ex(ells.begin(), ells.end());
    out.slope_ell = log_fit(ex, out.p.back());
    std::vector<double> col(ss.size());
    for (std::size_t si = 0; si < ss.size(); ++si) col[si] = out.p[si][0];
    out.slope_s = log_fit(ss, col);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Relaxation experiment

enum class RelaxStat { MidSiteOccupation, MidWindowZeros };

struct RelaxationReport {
  double t = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  bool pass = false;  // |estimate| < 3 se + 0.02
};

// Start with ell-coverage on the whole interval; after t = ell/(2 v_lower)
// + ell^beta a centered local statistic should have lost its initial bias.
inline RelaxationReport relaxation_experiment(double q, int L, int ell,
                                              double beta, RelaxStat f,
                                              const SpinConfig& init,
                                              double v_lower_hat, int N,
                                              std::uint64_t seed,
                                              int jobs = 1) {
  if (init.kind() != Boundary::Interval || init.length() != L)
    throw std::invalid_argument("start must be an Interval(L) config");
  if (!in_H(init, 0, L + 1, ell))
    throw std::domain_error("start lacks the required empty-site coverage");
  if (v_lower_hat <= 0.0)
    throw std::invalid_argument("v_lower_hat must be positive");
  const double t = ell / (2.0 * v_lower_hat) + std::pow(ell, beta);
  const int mid = (L + 1) / 2;
  const double p = 1.0 - q;

  std::vector<double> vals(static_cast<std::size_t>(N));
  parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t trial) {
    SimState st(init, ProcessKind::FA1f, SimParams{q});
    EventStream stream(derive_seed(seed, "relaxation", static_cast<int>(trial)),
                       q, 1, L);
    evolve(st, stream, t);
    if (f == RelaxStat::MidSiteOccupation) {
      vals[trial] = st.config.value(mid) - p;
    } else {
      const int lo = std::max(1, mid - 5);
      const int hi = std::min(L, lo + 9);
      int zeros = 0;
      for (int x = lo; x <= hi; ++x) zeros += 1 - st.config.value(x);
      vals[trial] = zeros - (hi - lo + 1) * q;
    }
  });
  RelaxationReport rep;
  rep.t = t;
  rep.estimate = mean(vals);
  rep.se = std_error_of_mean(vals);
  rep.ci_lo = rep.estimate - 1.96 * rep.se;
  rep.ci_hi = rep.estimate + 1.96 * rep.se;
  rep.pass = std::abs(rep.estimate) < 3.0 * rep.se + 0.02;
  return rep;
}

// Interval start with an empty site every `spacing` sites, occupied elsewhere.
inline SpinConfig spaced_zeros_start(int L, int spacing) {
  if (spacing < 1) throw std::invalid_argument("spacing must be >= 1");
  std::string bits(static_cast<std::size_t>(L), '1');
  for (int x = spacing; x <= L; x += spacing)
    bits[static_cast<std::size_t>(x - 1)] = '0';
  return SpinConfig::interval(L, bits);
}

}  // namespace kcm
