// Acceptance gate: twelve quantitative criteria at pinned parameters, one
// pass/fail line each. Exit code 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kcm/mixing.hpp"

namespace fs = std::filesystem;
using namespace kcm;

namespace {

constexpr std::uint64_t kMaster = 1009;
int failures = 0;

void report(int idx, const std::string& name, bool ok, double seconds,
            const std::string& detail) {
  std::printf("[%2d] %-28s %s  (%.1f s)  %s\n", idx, name.c_str(),
              ok ? "PASS" : "FAIL", seconds, detail.c_str());
  std::fflush(stdout);
  if (!ok) failures += 1;
}

template <class Fn>
void criterion(int idx, const std::string& name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  report(idx, name, ok, secs, detail);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Shared front-statistics fixture estimated once at the working density.
struct Fixture {
  double v = 0.0, s = 0.0, a = 0.0;
  double s2_ci_lo = 0.0;
};

Fixture fixture;

void build_fixture() {
  // pool over the canonical starts so the shared pair does not privilege
  // any one of them
  const auto inits = canonical_initials();
  double v = 0.0, s2 = 0.0, ci_lo = 1e300;
  for (std::size_t i = 0; i < inits.size(); ++i) {
    const auto est = estimate_speed_variance(
        inits[i], 0.9, 2000.0, 2000,
        derive_seed(kMaster, "fixture", static_cast<int>(i)), 1);
    v += est.v_hat / static_cast<double>(inits.size());
    s2 += est.s2_hat / static_cast<double>(inits.size());
    ci_lo = std::min(ci_lo, est.s2_ci_lo);
  }
  fixture.v = v;
  fixture.s = std::sqrt(std::max(s2, 0.0));
  fixture.s2_ci_lo = ci_lo;
  fixture.a = clt_window_constant(fixture.v, fixture.s);
  std::printf("shared fixture: v = %.4f, s = %.4f, a = %.4f\n", fixture.v,
              fixture.s, fixture.a);
  std::fflush(stdout);
}

double interp_profile(const TVProfile& p, double t) {
  const auto& ys = p.isotonic.empty() ? p.tv : p.isotonic;
  if (t <= p.times.front()) return ys.front();
  if (t >= p.times.back()) return ys.back();
  for (std::size_t i = 1; i < p.times.size(); ++i)
    if (p.times[i] >= t) {
      const double f = (t - p.times[i - 1]) / (p.times[i] - p.times[i - 1]);
      return ys[i - 1] + f * (ys[i] - ys[i - 1]);
    }
  return ys.back();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(KCM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

int main() {
  std::printf("acceptance run, master seed %llu\n",
              static_cast<unsigned long long>(kMaster));

  criterion(1, "reversibility", [](std::string& d) {
    double worst = 0.0;
    for (int L = 1; L <= 6; ++L)
      for (double q : {0.3, 0.5, 0.9})
        worst = std::max(worst, stationary_check(build_generator(L, q)));
    d = fmt("max residual %.2e (tol 1e-12)", worst);
    return worst <= 1e-12;
  });

  criterion(2, "exact-solver oracle", [](std::string& d) {
    const double q = 0.9;
    const auto G1 = build_generator(1, q);
    const auto one = SpinConfig::interval(1, "1");
    double worst1 = 0.0;
    for (double t : {0.0, 0.5, 1.0, 5.0})
      worst1 = std::max(worst1,
                        std::abs(tv_exact(G1, one, t) - q * std::exp(-t)));
    if (worst1 > 1e-9) {
      d = fmt("two-state mismatch %.2e", worst1);
      return false;
    }
    const int L = 8;
    const auto G = build_generator(L, q);
    const auto start = SpinConfig::interval_filled(L, 1);
    int inside = 0;
    double worst_gap = 0.0;
    const std::vector<double> grid{0.5, 1.0, 2.0, 4.0, 8.0};
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double exact = tv_exact(G, start, grid[i]);
      const auto est = tv_window_estimate(
          q, L, start, grid[i], L, 100000,
          derive_seed(kMaster, "oracle", static_cast<int>(i)), 1);
      if (exact >= est.ci_lo && exact <= est.ci_hi) inside += 1;
      worst_gap = std::max(worst_gap, std::abs(est.corrected - exact));
    }
    d = fmt("two-state err %.1e; CI hits %.0f/5, worst |est-exact| %.4f",
            worst1, static_cast<double>(inside), worst_gap);
    return inside == 5;
  });

  criterion(3, "domination coupling", [](std::string& d) {
    const double q = 0.9, T = 200.0;
    long violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      SimState eta(SpinConfig::delta_origin(), ProcessKind::FA1f, SimParams{q});
      SimState zeta(SpinConfig::full_line(0, "0"),
                    ProcessKind::ThresholdContact, SimParams{q});
      EventStream stream(derive_seed(kMaster, "domination", trial), q,
                         -kGuardBand, kGuardBand);
      std::vector<SimState*> states{&eta, &zeta};
      couple_evolve(states, stream, T,
                    [&](const std::vector<SimState*>& ss, const Event& e,
                        std::uint64_t) {
                      if (e.site > 0) return;
                      if (ss[0]->config.value(e.site) >
                          ss[1]->config.value(e.site))
                        violations += 1;
                    });
      for (int x = std::max(eta.config.lo(), zeta.config.lo()); x <= 0; ++x)
        if (eta.config.value(x) > zeta.config.value(x)) violations += 1;
    }
    d = fmt("%g pointwise violations over 1e4 trials",
            static_cast<double>(violations));
    return violations == 0;
  });

  criterion(4, "degenerate front law", [](std::string& d) {
    const auto est = estimate_speed_variance(
        SpinConfig::delta_origin(), 1.0, 500.0, 5000,
        derive_seed(kMaster, "degenerate", 0), 1);
    const double zv = std::abs(est.v_hat - 1.0) / est.v_se;
    const double zs = std::abs(est.s2_hat - 1.0) / est.s2_se;
    d = fmt("v off by %.2f se, s2 off by %.2f se", zv, zs);
    return zv < 3.0 && zs < 3.0;
  });

  build_fixture();

  criterion(5, "uniform front CLT", [](std::string& d) {
    const double q = 0.9, T = 2000.0;
    const int N = 2000;
    const bool degenerate = fixture.s2_ci_lo <= 0.0;
    std::string ps;
    bool ok = true;
    const auto inits = canonical_initials();
    for (std::size_t i = 0; i < inits.size(); ++i) {
      const auto r = clt_test(inits[i], q, T, N,
                              derive_seed(kMaster, "clt", static_cast<int>(i)),
                              fixture.v, fixture.s, degenerate, 1);
      if (r.degenerate_branch) {
        ok = ok && r.concentration > 0.9;
        ps += fmt("conc %.3f ", r.concentration);
      } else {
        ok = ok && r.p_value > 0.01;
        ps += fmt("p %.3f ", r.p_value);
      }
    }
    d = ps + "(threshold 0.01, shared v/s)";
    return ok;
  });

  criterion(6, "behind-front convergence", [](std::string& d) {
    const double q = 0.9;
    const int w = 10, N = 20000;
    const auto inits = canonical_initials();
    const auto la = behind_front_laws(inits[0], q, {500.0, 1000.0}, w, N,
                                      derive_seed(kMaster, "behind-a", 0),
                                      0.25, 1);
    const auto lb = behind_front_laws(inits[2], q, {500.0, 1000.0}, w, N,
                                      derive_seed(kMaster, "behind-b", 0),
                                      0.25, 1);
    const double tv_time_a =
        tv_corrected(la[0], la[1], derive_seed(kMaster, "behind-tv", 0))
            .corrected;
    const double tv_time_b =
        tv_corrected(lb[0], lb[1], derive_seed(kMaster, "behind-tv", 1))
            .corrected;
    const double tv_cross =
        tv_corrected(la[1], lb[1], derive_seed(kMaster, "behind-tv", 2))
            .corrected;
    d = fmt("tv in-time %.4f / %.4f, cross-config %.4f (tol 0.05)", tv_time_a,
            tv_time_b, tv_cross);
    return tv_time_a < 0.05 && tv_time_b < 0.05 && tv_cross < 0.05;
  });

  criterion(7, "cutoff reproduction", [](std::string& d) {
    CutoffParams par;
    par.q = 0.9;
    par.w = 8;
    par.N = 25600;  // 100 * 2^w
    par.v_hat = fixture.v;
    par.a = fixture.a;
    par.jobs = 1;
    const auto rep =
        cutoff_experiment({128, 256, 512}, par, derive_seed(kMaster, "cutoff", 0));
    const double rel =
        std::abs(rep.slope - rep.slope_target) / rep.slope_target;
    const bool slope_ok = rel < 0.1;
    const bool window_ok =
        rep.window_exponent >= 0.35 && rep.window_exponent <= 0.65;

    // profile shape at the largest size
    const auto& e512 = rep.entries.back();
    const double mid = 512.0 / (2.0 * fixture.v);
    const double root = std::sqrt(512.0);
    const double early = interp_profile(e512.profile, mid - 3.0 * root);
    // upper edge of the fitted window: t_50 plus the fitted width at L = 512
    std::vector<double> logL, logw;
    for (const auto& e : rep.entries) {
      logL.push_back(std::log(static_cast<double>(e.L)));
      logw.push_back(std::log(e.t_25 - e.t_75));
    }
    const auto wf = least_squares(logL, logw);
    const double width512 = std::exp(wf.intercept + wf.slope * logL.back());
    const double upper = e512.t_50 + width512;
    const double late = interp_profile(e512.profile, upper);
    const bool shape_ok = early >= 0.9 && late <= 0.1;
    d = fmt("slope err %.3f, exponent %.3f, ", rel, rep.window_exponent) +
        fmt("profile %.3f@-3rt / %.3f@+%.2frt", early, late,
            (upper - mid) / root);
    return slope_ok && window_ok && shape_ok;
  });

  criterion(8, "lower-bound certificate", [](std::string& d) {
    const auto rep =
        lower_bound_witness(0.9, 400, fixture.a, fixture.v, 4000,
                            derive_seed(kMaster, "witness", 0), 1);
    d = fmt("p_hat %.4f, mu mass %.1e, certificate %.4f (need 0.49)",
            rep.p_hat, rep.mu_mass, rep.certificate);
    return rep.certificate >= 0.49;
  });

  criterion(9, "zeros-lemma direction", [](std::string& d) {
    const auto table = zeros_experiment(0.9, {5, 10, 20, 40}, {100.0},
                                        SpinConfig::delta_origin(), 2000,
                                        derive_seed(kMaster, "zeros", 0), 1);
    bool ok = true;
    std::string ps;
    for (std::size_t li = 0; li < table.ells.size(); ++li) {
      ps += fmt("%.4f ", table.p[0][li]);
      if (li > 0 &&
          table.p[0][li] > table.p[0][li - 1] +
                               2.0 * (table.se[0][li] + table.se[0][li - 1]))
        ok = false;
    }
    d = "P(no coverage) = " + ps + "over scales {5,10,20,40}";
    return ok;
  });

  criterion(10, "non-monotonicity witness", [](std::string& d) {
    SimState lower(SpinConfig::interval(3, "001"), ProcessKind::FA1f,
                   SimParams{0.9});
    SimState upper(SpinConfig::interval(3, "101"), ProcessKind::FA1f,
                   SimParams{0.9});
    auto leq = [](const SimState& a, const SimState& b) {
      for (int x = 1; x <= 3; ++x)
        if (a.config.value(x) > b.config.value(x)) return false;
      return true;
    };
    const bool before = leq(lower, upper);
    EventScript script({{2, 1.0, 1}});
    std::vector<SimState*> states{&lower, &upper};
    couple_evolve(states, script, 2.0);
    const bool after = !leq(lower, upper) && !leq(upper, lower);
    d = std::string("ordered before: ") + (before ? "yes" : "no") +
        ", incomparable after: " + (after ? "yes" : "no");
    return before && after;
  });

  criterion(11, "parallelism invariance", [](std::string& d) {
    const auto dir = fs::temp_directory_path() / "kcm_acceptance";
    fs::create_directories(dir);
    const auto cfg = dir / "jobs.json";
    {
      std::ofstream os(cfg);
      os << R"({"q":0.9,"T":300,"N":400,"seed":77})";
    }
    const auto a = dir / "jobs1";
    const auto b = dir / "jobs8";
    fs::remove_all(a);
    fs::remove_all(b);
    if (run_cli("front-speed --config " + cfg.string() + " --jobs 1 --out " +
                a.string()) != 0 ||
        run_cli("front-speed --config " + cfg.string() + " --jobs 8 --out " +
                b.string()) != 0) {
      d = "CLI run failed";
      return false;
    }
    const bool same_report = slurp(a / "report.json") == slurp(b / "report.json");
    const bool same_csv =
        slurp(a / "front_speed.csv") == slurp(b / "front_speed.csv");
    d = std::string("report identical: ") + (same_report ? "yes" : "no") +
        ", csv identical: " + (same_csv ? "yes" : "no");
    return same_report && same_csv;
  });

  criterion(12, "two-front meeting", [](std::string& d) {
    const int L = 400, N = 500;
    const int ell = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(L))));
    const auto init = SpinConfig::interval_filled(L, 1);
    std::vector<double> taus;
    int h_ok = 0;
    for (int i = 0; i < N; ++i) {
      const auto rep = two_front_trace(
          init, 0.9, derive_seed(kMaster, "two-front", i), 1, ell);
      taus.push_back(rep.tau);
      h_ok += rep.h_behind_left && rep.h_behind_right;
    }
    const double B = static_cast<double>(L);
    const double center = B / (2.0 * fixture.v);
    const double half = 3.0 * fixture.a * std::sqrt(B);
    const double mean_tau = mean(taus);
    const double h_freq = static_cast<double>(h_ok) / N;
    d = fmt("mean tau %.1f in [%.1f, %.1f], ", mean_tau, center - half,
            center + half) +
        fmt("h-frequency %.3f (need 0.95)", h_freq);
    return mean_tau >= center - half && mean_tau <= center + half &&
           h_freq >= 0.95;
  });

  std::printf("%d/12 criteria passed\n", 12 - failures);
  return failures == 0 ? 0 : 1;
}
