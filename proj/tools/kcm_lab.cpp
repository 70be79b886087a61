// Experiment runner: every library operation behind a JSON-configured
// subcommand with reproducible seeding, parallel trials, and atomic
// artifact emission.
//
// Exit codes: 0 pass, 1 error (bad config, bad input, crash), 2 the run
// completed but an acceptance rule failed.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kcm/frontlab.hpp"
#include "kcm/mixing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config access with violation collection: every getter records a problem
// instead of throwing, so a bad config reports all of its issues at once.

class Config {
 public:
  explicit Config(const json& j) : j_(j) {}

  const std::vector<std::string>& violations() const { return errs_; }
  bool ok() const { return errs_.empty(); }

  double num(const std::string& key, double lo, double hi,
             std::optional<double> def = {}) {
    if (!j_.contains(key)) {
      if (def) return *def;
      errs_.push_back(key + ": required");
      return lo;
    }
    if (!j_[key].is_number()) {
      errs_.push_back(key + ": must be a number");
      return lo;
    }
    const double v = j_[key].get<double>();
    if (v < lo || v > hi) {
      errs_.push_back(key + ": must be in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
      return lo;
    }
    return v;
  }

  long long integer(const std::string& key, long long lo, long long hi,
                    std::optional<long long> def = {}) {
    if (!j_.contains(key)) {
      if (def) return *def;
      errs_.push_back(key + ": required");
      return lo;
    }
    if (!j_[key].is_number_integer()) {
      errs_.push_back(key + ": must be an integer");
      return lo;
    }
    const long long v = j_[key].get<long long>();
    if (v < lo || v > hi) {
      errs_.push_back(key + ": must be in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
      return lo;
    }
    return v;
  }

  std::string str(const std::string& key, std::optional<std::string> def = {}) {
    if (!j_.contains(key)) {
      if (def) return *def;
      errs_.push_back(key + ": required");
      return "";
    }
    if (!j_[key].is_string()) {
      errs_.push_back(key + ": must be a string");
      return "";
    }
    return j_[key].get<std::string>();
  }

  std::vector<double> num_list(const std::string& key, std::size_t min_count,
                               std::optional<std::vector<double>> def = {}) {
    if (!j_.contains(key)) {
      if (def) return *def;
      errs_.push_back(key + ": required");
      return {};
    }
    if (!j_[key].is_array()) {
      errs_.push_back(key + ": must be an array of numbers");
      return {};
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j_[key].size(); ++i) {
      if (!j_[key][i].is_number()) {
        errs_.push_back(key + "[" + std::to_string(i) + "]: must be a number");
        return {};
      }
      out.push_back(j_[key][i].get<double>());
    }
    if (out.size() < min_count)
      errs_.push_back(key + ": needs at least " + std::to_string(min_count) +
                      " values");
    return out;
  }

  std::vector<int> int_list(const std::string& key, std::size_t min_count,
                            std::optional<std::vector<int>> def = {}) {
    if (!j_.contains(key) && def) return *def;
    const auto xs = num_list(key, min_count);
    std::vector<int> out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] != static_cast<int>(xs[i])) {
        errs_.push_back(key + "[" + std::to_string(i) + "]: must be an integer");
        return {};
      }
      out.push_back(static_cast<int>(xs[i]));
    }
    return out;
  }

  std::optional<kcm::SpinConfig> start(const std::string& key,
                                       const std::string& fallback) {
    const auto lit = str(key, fallback);
    if (lit.empty()) return {};
    try {
      return kcm::SpinConfig::parse(lit);
    } catch (const std::exception& e) {
      errs_.push_back(key + ": " + e.what());
      return {};
    }
  }

  void sorted(const std::string& key, const std::vector<double>& xs) {
    if (!std::is_sorted(xs.begin(), xs.end()))
      errs_.push_back(key + ": must be sorted ascending");
  }

  void fail(const std::string& msg) { errs_.push_back(msg); }

 private:
  const json& j_;
  std::vector<std::string> errs_;
};

// ---------------------------------------------------------------------------
// Artifact plumbing

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void atomic_write(const fs::path& dir, const std::string& name,
                  const std::string& body) {
  fs::create_directories(dir);
  const fs::path tmp = dir / (name + ".tmp");
  const fs::path dst = dir / name;
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << body;
  }
  fs::rename(tmp, dst);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Shared run context: output paths plus the deterministic report under
// construction. Telemetry lives in its own file so report and CSV bodies
// stay byte-identical across reruns and thread counts.
struct Run {
  fs::path out;
  json report;
  bool pass = true;

  void emit(const std::string& name, const std::string& body) const {
    atomic_write(out, name, body);
  }
  void finish(std::uint64_t wall_ms) const {
    emit("report.json", report.dump(2) + "\n");
    json tel;
    tel["wall_ms"] = wall_ms;
    atomic_write(out, "telemetry.json", tel.dump(2) + "\n");
  }
};

std::string profile_csv(const kcm::TVProfile& p, const std::string& mode) {
  std::ostringstream os;
  os << "L,q,t,tv,ci_lo,ci_hi,mode\n";
  for (std::size_t i = 0; i < p.times.size(); ++i)
    os << p.L << ',' << fmt(p.q) << ',' << fmt(p.times[i]) << ','
       << fmt(p.tv[i]) << ','
       << fmt(i < p.ci_lo.size() ? p.ci_lo[i] : p.tv[i]) << ','
       << fmt(i < p.ci_hi.size() ? p.ci_hi[i] : p.tv[i]) << ',' << mode
       << '\n';
  return os.str();
}

// Tidy long-format series for plotting: one row per point.
std::string plot_csv(
    const std::vector<std::tuple<std::string, double, double, double, double>>&
        rows) {
  if (rows.empty()) throw std::domain_error("nothing plottable");
  std::ostringstream os;
  os << "series,x,y,ci_lo,ci_hi\n";
  for (const auto& [s, x, y, lo, hi] : rows)
    os << s << ',' << fmt(x) << ',' << fmt(y) << ',' << fmt(lo) << ','
       << fmt(hi) << '\n';
  return os.str();
}

json tv_json(const kcm::TvEstimate& tv) {
  return {{"plug_in", tv.plug_in},
          {"corrected", tv.corrected},
          {"ci_lo", tv.ci_lo},
          {"ci_hi", tv.ci_hi}};
}

// ---------------------------------------------------------------------------
// Subcommand runners. Each validates through `Config`, runs, fills
// run.report["results"], and flips run.pass on acceptance-rule failure.

void run_front_speed(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const double T = c.num("T", 1e-9, 1e9);
  const int N = static_cast<int>(c.integer("N", 2, 100000000));
  const auto start = c.start("start", "halfline:...@0");
  if (!c.ok()) return;
  const auto est = kcm::estimate_speed_variance(*start, q, T, N, seed, jobs);
  run.report["results"] = {{"v_hat", est.v_hat},       {"v_se", est.v_se},
                           {"v_ci_lo", est.v_ci_lo},   {"v_ci_hi", est.v_ci_hi},
                           {"s2_hat", est.s2_hat},     {"s2_se", est.s2_se},
                           {"s2_ci_lo", est.s2_ci_lo}, {"s2_ci_hi", est.s2_ci_hi},
                           {"trials", est.trials},     {"horizon", est.horizon}};
  std::ostringstream os;
  os << "metric,value,ci_lo,ci_hi\n"
     << "v_hat," << fmt(est.v_hat) << ',' << fmt(est.v_ci_lo) << ','
     << fmt(est.v_ci_hi) << '\n'
     << "s2_hat," << fmt(est.s2_hat) << ',' << fmt(est.s2_ci_lo) << ','
     << fmt(est.s2_ci_hi) << '\n';
  run.emit("front_speed.csv", os.str());
  run.pass = est.v_hat > 0.0 && est.s2_hat >= 0.0;
}

void run_clt(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const double T = c.num("T", 1e-9, 1e9);
  const int N = static_cast<int>(c.integer("N", 10, 100000000));
  const double p_min = c.num("p_min", 0.0, 1.0, 0.01);
  const auto start = c.start("start", "halfline:...@0");
  const bool have_v = c.num("v_hat", -1e9, 1e9, 0.0) != 0.0;
  if (!c.ok()) return;

  double v_hat, s_hat;
  if (have_v) {
    v_hat = c.num("v_hat", -1e9, 1e9);
    s_hat = c.num("s_hat", 0.0, 1e9);
  } else {
    const auto est = kcm::estimate_speed_variance(
        *start, q, T, N, kcm::derive_seed(seed, "calibrate", 0), jobs);
    v_hat = est.v_hat;
    s_hat = std::sqrt(std::max(est.s2_hat, 0.0));
    if (est.s2_ci_lo <= 0.0) s_hat = 0.0;  // CI includes zero: degenerate
  }
  if (!c.ok()) return;
  const bool degenerate = s_hat == 0.0;
  const auto r =
      kcm::clt_test(*start, q, T, N, seed, v_hat, s_hat, degenerate, jobs);
  run.report["results"] = {{"p_value", r.p_value},
                           {"ks_d", r.ks_d},
                           {"degenerate_branch", r.degenerate_branch},
                           {"concentration", r.concentration},
                           {"v_hat", v_hat},
                           {"s_hat", s_hat}};
  std::ostringstream os;
  os << "standardized\n";
  for (double x : r.standardized) os << fmt(x) << '\n';
  run.emit("clt.csv", os.str());
  run.pass = degenerate ? r.concentration > 0.9 : r.p_value > p_min;
}

void run_behind_front(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const auto times = c.num_list("times", 1);
  c.sorted("times", times);
  const int w = static_cast<int>(c.integer("w", 1, 12));
  const int N = static_cast<int>(c.integer("N", 10, 100000000));
  const double hint = c.num("v_lower_hint", 1e-6, 10.0, 0.25);
  const double tv_pass = c.num("tv_pass", 0.0, 1.0, 0.05);
  std::vector<kcm::SpinConfig> starts;
  if (auto s0 = c.start("start", "halfline:...@0")) starts.push_back(*s0);
  // optional second start for the cross-configuration comparison
  const auto lit_b = c.str("start_b", "");
  if (!lit_b.empty()) {
    try {
      starts.push_back(kcm::SpinConfig::parse(lit_b));
    } catch (const std::exception& e) {
      c.fail(std::string("start_b: ") + e.what());
    }
  }
  if (!c.ok()) return;

  std::vector<std::vector<kcm::EmpiricalLaw>> laws;
  for (std::size_t si = 0; si < starts.size(); ++si)
    laws.push_back(kcm::behind_front_laws(
        starts[si], q, times, w, N,
        kcm::derive_seed(seed, "start", static_cast<int>(si)), hint, jobs));

  json tvs = json::array();
  double worst = 0.0;
  std::ostringstream os;
  os << "start,t,pattern,count\n";
  for (std::size_t si = 0; si < laws.size(); ++si)
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const auto& counts = laws[si][ti].counts();
      for (std::size_t b = 0; b < counts.size(); ++b)
        if (counts[b])
          os << si << ',' << fmt(times[ti]) << ',' << b << ',' << counts[b]
             << '\n';
      if (ti > 0) {
        const auto tv = kcm::tv_corrected(
            laws[si][ti - 1], laws[si][ti],
            kcm::derive_seed(seed, "tv-time", static_cast<int>(si * 100 + ti)));
        tvs.push_back({{"kind", "consecutive-times"},
                       {"start", si},
                       {"t_a", times[ti - 1]},
                       {"t_b", times[ti]},
                       {"tv", tv_json(tv)}});
        worst = std::max(worst, tv.corrected);
      }
    }
  if (laws.size() == 2) {
    const auto tv = kcm::tv_corrected(laws[0].back(), laws[1].back(),
                                      kcm::derive_seed(seed, "tv-cross", 0));
    tvs.push_back({{"kind", "cross-start"},
                   {"t", times.back()},
                   {"tv", tv_json(tv)}});
    worst = std::max(worst, tv.corrected);
  }
  run.report["results"] = {{"tvs", tvs}, {"worst_tv", worst}};
  run.emit("behind_front.csv", os.str());
  run.pass = worst < tv_pass;
}

void run_contact_speed(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const double T = c.num("T", 1e-9, 1e9);
  const int N = static_cast<int>(c.integer("N", 2, 100000000));
  const double min_survival = c.num("min_survival", 0.0, 1.0, 0.5);
  if (!c.ok()) return;
  try {
    const auto b = kcm::contact_spread_speed(q, T, N, seed, jobs);
    run.report["results"] = {{"v_lower_hat", b.v_lower_hat},
                             {"v_upper", b.v_upper},
                             {"survival_fraction", b.survival_fraction}};
    run.pass = b.survival_fraction >= min_survival;
  } catch (const kcm::ExtinctionError& e) {
    run.report["results"] = {{"extinct", true},
                             {"extinction_fraction", e.extinction_fraction}};
    run.pass = false;
  }
}

void run_two_front(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const int L = static_cast<int>(c.integer("L", 2, 1000000));
  const int N = static_cast<int>(c.integer("N", 1, 100000000));
  const int stop_gap = static_cast<int>(c.integer("stop_gap", 1, 1000000, 1));
  const long long default_ell =
      static_cast<long long>(std::ceil(std::sqrt(static_cast<double>(L))));
  const int ell =
      static_cast<int>(c.integer("ell", 1, 1000000, default_ell));
  const double min_h = c.num("min_h_frequency", 0.0, 1.0, 0.9);
  if (!c.ok()) return;

  const auto init = kcm::SpinConfig::interval_filled(L, 1);
  std::vector<kcm::TwoFrontReport> reps(static_cast<std::size_t>(N));
  kcm::parallel_for(static_cast<std::size_t>(N), jobs, [&](std::size_t i) {
    reps[i] = kcm::two_front_trace(
        init, q, kcm::derive_seed(seed, "two-front", static_cast<int>(i)),
        stop_gap, ell);
  });
  std::vector<double> taus;
  int r_held = 0, h_ok = 0;
  std::ostringstream os;
  os << "trial,tau,x_tau,y_tau,r_event_held,h_behind_left,h_behind_right\n";
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto& r = reps[i];
    taus.push_back(r.tau);
    r_held += r.r_event_held;
    h_ok += r.h_behind_left && r.h_behind_right;
    os << i << ',' << fmt(r.tau) << ',' << r.x_tau << ',' << r.y_tau << ','
       << r.r_event_held << ',' << r.h_behind_left << ',' << r.h_behind_right
       << '\n';
  }
  const double h_freq = static_cast<double>(h_ok) / N;
  run.report["results"] = {{"mean_tau", kcm::mean(taus)},
                           {"se_tau", kcm::std_error_of_mean(taus)},
                           {"r_frequency", static_cast<double>(r_held) / N},
                           {"h_frequency", h_freq},
                           {"ell", ell}};
  run.emit("two_front.csv", os.str());
  // first trial's sampled front traces, plot-ready (no CI for raw traces)
  std::ostringstream ts;
  ts << "series,x,y,ci_lo,ci_hi\n";
  for (std::size_t i = 0; i < reps[0].left.times.size(); ++i)
    ts << "X_t," << fmt(reps[0].left.times[i]) << ','
       << reps[0].left.positions[i] << ",,\n";
  for (std::size_t i = 0; i < reps[0].right.times.size(); ++i)
    ts << "Y_t," << fmt(reps[0].right.times[i]) << ','
       << reps[0].right.positions[i] << ",,\n";
  run.emit("two_front_traces.csv", ts.str());
  run.pass = h_freq >= min_h;
}

void run_tv_exact(Config& c, Run& run, std::uint64_t, int) {
  const double q = c.num("q", 0.0, 1.0);
  const int L = static_cast<int>(c.integer("L", 1, 14));
  const auto times = c.num_list("times", 1);
  c.sorted("times", times);
  const auto start =
      c.start("start", L >= 1 && L <= 14
                           ? kcm::SpinConfig::interval_filled(L, 1).to_literal()
                           : "interval:1");
  if (!c.ok()) return;
  const auto G = kcm::build_generator(L, q);
  kcm::TVProfile p;
  p.times = times;
  p.exact = true;
  p.L = L;
  p.q = q;
  p.start = start->to_literal();
  for (double t : times) p.tv.push_back(kcm::tv_exact(G, *start, t));
  run.report["results"] = {{"times", p.times},
                           {"tv", p.tv},
                           {"residual", kcm::stationary_check(G)}};
  run.emit("tv_exact.csv", profile_csv(p, "exact"));
}

void run_mixing_profile(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const int L = static_cast<int>(c.integer("L", 1, 10000000));
  const int w = static_cast<int>(c.integer("w", 1, 12, 10));
  const int N = static_cast<int>(c.integer("N", 1, 100000000));
  const auto times = c.num_list("times", 1);
  c.sorted("times", times);
  const auto start =
      c.start("start", L >= 1 ? kcm::SpinConfig::interval_filled(L, 1).to_literal()
                              : "interval:1");
  if (w >= 1 && static_cast<long long>(N) < (10ll << w))
    c.fail("N: must be at least 10 * 2^w");
  if (w > L) c.fail("w: wider than L");
  if (!c.ok()) return;
  const auto p = kcm::mixing_profile(q, L, *start, times, w, N, seed, jobs);
  json crossings;
  for (double eps : {0.75, 0.5, 0.25}) {
    try {
      crossings[fmt(eps)] = kcm::threshold_crossing(p, eps);
    } catch (const kcm::HorizonError&) {
      crossings[fmt(eps)] = nullptr;
    }
  }
  run.report["results"] = {{"times", p.times},
                           {"tv", p.tv},
                           {"isotonic", p.isotonic},
                           {"crossings", crossings}};
  run.emit("mixing_profile.csv", profile_csv(p, "estimate"));
}

void run_cutoff(Config& c, Run& run, std::uint64_t seed, int jobs) {
  kcm::CutoffParams par;
  par.q = c.num("q", 0.0, 1.0);
  const auto Ls = c.int_list("L_list", 3);
  par.w = static_cast<int>(c.integer("w", 1, 12, 10));
  par.N = static_cast<int>(c.integer("N", 0, 100000000, 0));
  par.v_hat = c.num("v_hat", 1e-6, 10.0);
  par.v_lower_hat = c.num("v_lower_hat", 1e-6, 10.0, 0.25);
  par.a = c.num("a", 0.0, 1e6, 0.0);
  par.delta = c.num("delta", 1e-6, 1.0, 0.1);
  par.jobs = jobs;
  const double slope_tol = c.num("slope_tol", 0.0, 10.0, 0.1);
  for (int L : Ls)
    if (L < 2 || L > 10000000) c.fail("L_list: entries must be in [2, 1e7]");
  if (!c.ok()) return;

  const auto rep = kcm::cutoff_experiment(Ls, par, seed);
  json entries = json::array();
  std::vector<std::tuple<std::string, double, double, double, double>> rows;
  for (const auto& e : rep.entries) {
    entries.push_back({{"L", e.L},
                       {"t_75", e.t_75},
                       {"t_50", e.t_50},
                       {"t_25", e.t_25},
                       {"t1", e.t1},
                       {"t2", e.t2},
                       {"t3", e.t3}});
    for (std::size_t i = 0; i < e.profile.times.size(); ++i)
      rows.emplace_back("L" + std::to_string(e.L), e.profile.times[i],
                        e.profile.tv[i], e.profile.ci_lo[i],
                        e.profile.ci_hi[i]);
  }
  const double rel =
      std::abs(rep.slope - rep.slope_target) / rep.slope_target;
  run.report["results"] = {{"schema_version", 1},
                           {"entries", entries},
                           {"slope", rep.slope},
                           {"slope_target", rep.slope_target},
                           {"slope_rel_err", rel},
                           {"window_exponent", rep.window_exponent}};
  run.emit("cutoff_profiles.csv", plot_csv(rows));
  run.pass = rel <= slope_tol && rep.window_exponent >= 0.35 &&
             rep.window_exponent <= 0.65;
}

void run_zeros(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const auto ells = c.int_list("ells", 1);
  const auto ss = c.num_list("ss", 1);
  c.sorted("ss", ss);
  const int N = static_cast<int>(c.integer("N", 2, 100000000));
  const auto start = c.start("start", "halfline:...@0");
  for (int ell : ells)
    if (ell < 1) c.fail("ells: entries must be >= 1");
  if (c.ok() && start->kind() != kcm::Boundary::LeftHalfLine)
    c.fail("start: must be a halfline literal");
  if (!c.ok()) return;

  const auto table = kcm::zeros_experiment(q, ells, ss, *start, N, seed, jobs);
  std::ostringstream os;
  os << "s,ell,p,se\n";
  bool monotone = true;
  for (std::size_t si = 0; si < ss.size(); ++si)
    for (std::size_t li = 0; li < ells.size(); ++li) {
      os << fmt(ss[si]) << ',' << ells[li] << ',' << fmt(table.p[si][li])
         << ',' << fmt(table.se[si][li]) << '\n';
      if (li > 0 &&
          table.p[si][li] > table.p[si][li - 1] +
                                2.0 * (table.se[si][li] + table.se[si][li - 1]))
        monotone = false;
    }
  run.report["results"] = {{"p", table.p},
                           {"se", table.se},
                           {"slope_ell", table.slope_ell},
                           {"slope_s", table.slope_s}};
  run.emit("zeros.csv", os.str());
  run.pass = monotone;
}

void run_relaxation(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const int L = static_cast<int>(c.integer("L", 1, 10000000));
  const int ell = static_cast<int>(c.integer("ell", 1, 10000000));
  const double beta = c.num("beta", 0.0, 1.0, 0.25);
  const double v_lower = c.num("v_lower_hat", 1e-6, 100.0, 0.25);
  const int N = static_cast<int>(c.integer("N", 2, 100000000));
  const auto stat_name = c.str("stat", "mid-window-zeros");
  kcm::RelaxStat stat = kcm::RelaxStat::MidWindowZeros;
  if (stat_name == "mid-site")
    stat = kcm::RelaxStat::MidSiteOccupation;
  else if (stat_name != "mid-window-zeros")
    c.fail("stat: must be \"mid-site\" or \"mid-window-zeros\"");
  std::optional<kcm::SpinConfig> start;
  if (L >= 1 && ell >= 1 && ell <= L)
    start = c.start("start", kcm::spaced_zeros_start(L, ell).to_literal());
  else
    c.fail("ell: must be <= L");
  if (!c.ok()) return;
  const auto rep = kcm::relaxation_experiment(q, L, ell, beta, stat, *start,
                                              v_lower, N, seed, jobs);
  run.report["results"] = {{"t", rep.t},
                           {"estimate", rep.estimate},
                           {"se", rep.se},
                           {"ci_lo", rep.ci_lo},
                           {"ci_hi", rep.ci_hi},
                           {"pass", rep.pass}};
  run.pass = rep.pass;
}

void run_lower_bound(Config& c, Run& run, std::uint64_t seed, int jobs) {
  const double q = c.num("q", 0.0, 1.0);
  const int L = static_cast<int>(c.integer("L", 2, 10000000));
  const double a = c.num("a", 0.0, 1e6);
  const double v_hat = c.num("v_hat", 1e-6, 10.0);
  const int N = static_cast<int>(c.integer("N", 2, 100000000));
  const double offset_scale = c.num("offset_scale", 0.0, 100.0, 2.0);
  const double min_cert = c.num("min_certificate", -1.0, 1.0, 0.0);
  if (!c.ok()) return;
  const auto rep =
      kcm::lower_bound_witness(q, L, a, v_hat, N, seed, jobs, offset_scale);
  run.report["results"] = {{"t", rep.t},
                           {"window_lo", rep.window_lo},
                           {"window_hi", rep.window_hi},
                           {"p_hat", rep.p_hat},
                           {"se", rep.se},
                           {"mu_mass", rep.mu_mass},
                           {"certificate", rep.certificate}};
  run.pass = rep.certificate >= min_cert;
}

void run_replay(Config& c, Run& run, std::uint64_t seed, int) {
  const double q = c.num("q", 0.0, 1.0);
  const double horizon = c.num("horizon", 0.0, 1e9);
  const auto events_path = c.str("events", "");
  if (events_path.empty()) {
    // record mode: dump the graphical construction for a site window
    const int lo = static_cast<int>(c.integer("lo", -10000000, 10000000));
    const int hi = static_cast<int>(c.integer("hi", -10000000, 10000000));
    if (lo > hi) c.fail("lo: must be <= hi");
    if (!c.ok()) return;
    kcm::EventStream stream(seed, q, lo, hi);
    const auto log = kcm::record_events(stream, horizon);
    std::ostringstream os;
    kcm::write_event_csv(os, log.events);
    run.emit("events.csv", os.str());
    run.report["results"] = {{"event_count", log.events.size()}};
    return;
  }
  const auto start = c.start("start", "");
  if (!c.ok()) return;
  std::ifstream is(events_path);
  if (!is) {
    c.fail("events: cannot open " + events_path);
    return;
  }
  kcm::EventScript script(kcm::read_event_csv(is));
  kcm::SimState st(*start, kcm::ProcessKind::FA1f, kcm::SimParams{q});
  const auto traj = kcm::evolve(st, script, horizon);
  run.report["results"] = {{"final", st.config.to_literal()},
                           {"event_count", traj.event_count}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FA-1f front and mixing laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::int64_t seed_override = -1;
  int jobs = 0;

  const std::vector<std::string> names = {
      "front-speed", "clt",  "behind-front",   "contact-speed",
      "two-front",   "tv-exact", "mixing-profile", "cutoff",
      "zeros",       "relaxation", "lower-bound", "replay"};
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_override, "master seed override");
    sub->add_option("--jobs", jobs, "worker threads");
    sub->add_option("--out", out_dir, "artifact directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto t_start = std::chrono::steady_clock::now();
  try {
    const std::string name = app.get_subcommands().front()->get_name();

    std::ifstream is(config_path);
    if (!is) {
      std::fprintf(stderr, "error: cannot open config %s\n",
                   config_path.c_str());
      return 1;
    }
    json cfg;
    try {
      cfg = json::parse(is);
    } catch (const json::exception& e) {
      std::fprintf(stderr, "error: bad JSON: %s\n", e.what());
      return 1;
    }
    Config c(cfg);
    if (cfg.contains("subcommand") && cfg["subcommand"] != name)
      c.fail("subcommand: does not match the invoked subcommand");
    std::uint64_t seed =
        static_cast<std::uint64_t>(c.integer("seed", 0, std::numeric_limits<long long>::max()));
    if (seed_override >= 0) seed = static_cast<std::uint64_t>(seed_override);
    if (jobs == 0) {
      if (const char* env = std::getenv("KCM_LAB_JOBS")) jobs = std::atoi(env);
      if (jobs == 0)
        jobs = static_cast<int>(c.integer("jobs", 1, 1024, 1));
    }
    if (jobs < 1 || jobs > 1024) {
      std::fprintf(stderr, "config error: jobs: must be in [1, 1024]\n");
      return 1;
    }

    Run run;
    run.out = out_dir;
    run.report["subcommand"] = name;
    run.report["config"] = cfg;
    run.report["config_hash"] = fnv1a(cfg.dump());
    run.report["seed"] = seed;

    if (name == "front-speed") run_front_speed(c, run, seed, jobs);
    else if (name == "clt") run_clt(c, run, seed, jobs);
    else if (name == "behind-front") run_behind_front(c, run, seed, jobs);
    else if (name == "contact-speed") run_contact_speed(c, run, seed, jobs);
    else if (name == "two-front") run_two_front(c, run, seed, jobs);
    else if (name == "tv-exact") run_tv_exact(c, run, seed, jobs);
    else if (name == "mixing-profile") run_mixing_profile(c, run, seed, jobs);
    else if (name == "cutoff") run_cutoff(c, run, seed, jobs);
    else if (name == "zeros") run_zeros(c, run, seed, jobs);
    else if (name == "relaxation") run_relaxation(c, run, seed, jobs);
    else if (name == "lower-bound") run_lower_bound(c, run, seed, jobs);
    else if (name == "replay") run_replay(c, run, seed, jobs);

    if (!c.ok()) {
      for (const auto& v : c.violations())
        std::fprintf(stderr, "config error: %s\n", v.c_str());
      return 1;
    }
    run.report["pass"] = run.pass;
    const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t_start)
                          .count();
    run.finish(static_cast<std::uint64_t>(wall));
    return run.pass ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
