#pragma once

// Update kernels and trajectory evolution. Both process kinds run off the
// same event stream, which is what makes the couplings exact per event.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kcm/events.hpp"
#include "kcm/lattice.hpp"

namespace kcm {

enum class ProcessKind {
  FA1f,             // refresh gated by an empty neighbor
  ThresholdContact, // unconstrained 0->1, neighbor-gated 1->0
};

// Thrown when the adaptive site window would exceed the hard cap.
struct WindowCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kGuardBand = 64;
inline constexpr long kWindowHardCap = 10'000'000;

inline int constraint(const SpinConfig& c, int x) {
  if (!c.is_dynamic(x)) throw std::domain_error("constraint at frozen site");
  return 1 - c.value(x - 1) * c.value(x + 1);
}

inline double local_rate(const SpinConfig& c, int x, const SimParams& params,
                         ProcessKind kind) {
  const int cx = constraint(c, x);
  const double q = params.q;
  const int v = c.value(x);
  if (kind == ProcessKind::FA1f)
    return cx * (q * v + (1.0 - q) * (1 - v));
  return cx * q * v + (1.0 - q) * (1 - v);
}

struct SimState {
  SpinConfig config;
  double clock = 0.0;
  ProcessKind kind = ProcessKind::FA1f;
  SimParams params;

  // Extremes of the stored empty sites, maintained incrementally.
  int min_zero = SpinConfig::no_site;
  int max_zero = SpinConfig::no_site;

  SimState(SpinConfig c, ProcessKind k, SimParams p)
      : config(std::move(c)), kind(k), params(p) {
    rescan_zeros();
  }

  void rescan_zeros() {
    min_zero = config.next_zero_at_or_after(config.lo());
    if (min_zero != SpinConfig::no_site && min_zero > config.hi())
      min_zero = SpinConfig::no_site;  // boundary zero, not a stored one
    max_zero = config.last_zero_at_or_before(config.hi());
  }

  int front() const {
    switch (config.kind()) {
      case Boundary::Interval:
      case Boundary::SeenFromFront:
        return 0;
      case Boundary::LeftHalfLine:
        return min_zero == SpinConfig::no_site ? 0 : std::min(min_zero, 0);
      case Boundary::FullLine:
        if (min_zero == SpinConfig::no_site)
          throw std::domain_error("no empty site left");
        return min_zero;
    }
    return 0;
  }

  bool has_empty() const { return min_zero != SpinConfig::no_site; }
};

// Applies one graphical-construction event. Returns true iff the value at
// e.site changed.
inline bool apply_event(SimState& state, const Event& e) {
  if (e.time < state.clock)
    throw std::logic_error("stale event delivered to apply_event");
  state.clock = e.time;
  if (!state.config.is_dynamic(e.site)) return false;
  const int old = state.config.value(e.site);
  int next = old;
  const int cx = constraint(state.config, e.site);
  if (cx == 1) {
    next = e.mark;
  } else if (state.kind == ProcessKind::ThresholdContact && old == 0 &&
             e.mark == 1) {
    next = 1;
  }
  if (next == old) return false;
  state.config.set(e.site, next);
  const int x = e.site;
  if (next == 0) {
    if (state.min_zero == SpinConfig::no_site || x < state.min_zero)
      state.min_zero = x;
    if (state.max_zero == SpinConfig::no_site || x > state.max_zero)
      state.max_zero = x;
  } else {
    if (x == state.min_zero && x == state.max_zero) {
      state.min_zero = state.max_zero = SpinConfig::no_site;
    } else {
      if (x == state.min_zero)
        state.min_zero = state.config.next_zero_at_or_after(x + 1);
      if (x == state.max_zero)
        state.max_zero = state.config.last_zero_at_or_before(x - 1);
    }
  }
  return true;
}

// Grows the stored window (and the stream) so the empty region never
// touches the edge. Exact: sites beyond the guard band are fully occupied
// together with their outer neighbors, hence inert until the front arrives.
template <class Stream>
inline void ensure_window(SimState& state, Stream& stream) {
  SpinConfig& c = state.config;
  // a full-line config with no empty site left is all ones and inert
  if (c.kind() == Boundary::FullLine &&
      state.min_zero == SpinConfig::no_site)
    return;
  if (c.kind() == Boundary::LeftHalfLine || c.kind() == Boundary::FullLine) {
    const int mz = state.min_zero == SpinConfig::no_site
                       ? (c.kind() == Boundary::LeftHalfLine ? 0 : c.lo())
                       : state.min_zero;
    if (mz - c.lo() < 2) {
      const int new_lo = mz - kGuardBand;
      if (static_cast<long>(c.hi()) - new_lo + 1 > kWindowHardCap)
        throw WindowCapError("site window exceeded hard cap");
      c.grow_left(new_lo);
      stream.extend_left(new_lo);
    }
  }
  if (c.kind() == Boundary::FullLine) {
    const int xz = state.max_zero == SpinConfig::no_site ? c.hi() : state.max_zero;
    if (c.hi() - xz < 2) {
      const int new_hi = xz + kGuardBand;
      if (new_hi - static_cast<long>(c.lo()) + 1 > kWindowHardCap)
        throw WindowCapError("site window exceeded hard cap");
      c.grow_right(new_hi);
      stream.extend_right(new_hi);
    }
  }
}

struct Trajectory {
  SpinConfig initial;
  std::vector<double> snapshot_times;
  std::vector<SpinConfig> snapshots;
  std::uint64_t event_count = 0;
};

namespace detail {
struct NoOpObserver {
  template <class... Args>
  void operator()(Args&&...) const {}
};
}  // namespace detail

// Runs the state forward to `horizon`, recording configuration snapshots at
// the requested times. `on_event(state, event, changed)` fires after every
// applied event.
template <class Stream, class OnEvent = detail::NoOpObserver>
Trajectory evolve(SimState& state, Stream& stream, double horizon,
                  std::vector<double> snapshot_times = {},
                  OnEvent&& on_event = OnEvent{}) {
  if (horizon < state.clock)
    throw std::invalid_argument("horizon before current clock");
  std::sort(snapshot_times.begin(), snapshot_times.end());
  Trajectory traj{state.config, std::move(snapshot_times), {}, 0};
  std::size_t snap = 0;
  auto take_snaps_until = [&](double t) {
    while (snap < traj.snapshot_times.size() && traj.snapshot_times[snap] <= t) {
      traj.snapshots.push_back(state.config);
      ++snap;
    }
  };
  ensure_window(state, stream);
  while (stream.peek_time() <= horizon) {
    const Event e = stream.pop();
    take_snaps_until(e.time);
    const bool changed = apply_event(state, e);
    traj.event_count += 1;
    if (changed) ensure_window(state, stream);
    on_event(state, e, changed);
  }
  state.clock = horizon;
  take_snaps_until(horizon);
  return traj;
}

// Runs several states off one shared stream: every event is offered to each
// state in order, so all states see the identical (site, time, mark) sequence.
template <class Stream, class OnEvent = detail::NoOpObserver>
std::uint64_t couple_evolve(std::vector<SimState*>& states, Stream& stream,
                            double horizon, OnEvent&& on_event = OnEvent{}) {
  for (SimState* s : states)
    if (s->params.q != states[0]->params.q)
      throw std::invalid_argument("coupled states must share q");
  std::uint64_t count = 0;
  for (SimState* s : states) ensure_window(*s, stream);
  while (stream.peek_time() <= horizon) {
    const Event e = stream.pop();
    bool any = false;
    for (SimState* s : states) any |= apply_event(*s, e);
    count += 1;
    if (any)
      for (SimState* s : states) ensure_window(*s, stream);
    on_event(states, e, count);
  }
  for (SimState* s : states) s->clock = horizon;
  return count;
}

}  // namespace kcm
