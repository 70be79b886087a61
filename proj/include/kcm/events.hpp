#pragma once

// Per-site ring/mark sources merged into a single time-ordered stream.
// Each site carries an independent Poisson(1) clock and Bernoulli(1-q)
// refresh marks, all derived from (seed, site, event index), so the stream
// is reproducible and stable under window growth.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcm/rng.hpp"

namespace kcm {

struct StreamKey {
  std::uint64_t seed;
  int site;
};

struct Event {
  int site;
  double time;
  int mark;
};

// Calendar queue over one pending ring per site. Buckets of width 1/n cover
// time cyclically; an entry is delivered when the bucket cursor reaches its
// absolute bucket number, so delivery order is exactly (time, site). O(1)
// per event and independent of the window size.
class EventStream {
 public:
  EventStream(std::uint64_t seed, double q, int lo, int hi)
      : seed_(seed), q_(q), lo_(lo), hi_(hi) {
    if (lo > hi) throw std::invalid_argument("empty site window");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("q out of [0,1]");
    rebuild();
  }

  int lo() const { return lo_; }
  int hi() const { return hi_; }
  double q() const { return q_; }
  std::uint64_t seed() const { return seed_; }
  double last_time() const { return last_time_; }

  double peek_time() { return find_head()->t; }

  Event pop() {
    Entry* head = find_head();
    const Entry e = *head;
    auto& bucket = buckets_[static_cast<std::size_t>(cursor_) & mask_];
    *head = bucket.back();
    bucket.pop_back();
    last_time_ = e.t;
    insert(Entry{e.t + ring_gap(seed_, e.site, e.idx + 1), 0, e.site,
                 e.idx + 1});
    return Event{e.site, e.t, ring_mark(seed_, e.site, e.idx, q_)};
  }

  // Activates [new_lo, lo-1]; their events before the stream's current time
  // are skipped, which is the documented delivery contract.
  void extend_left(int new_lo) {
    if (new_lo >= lo_) return;
    lo_ = new_lo;
    rebuild();
  }

  void extend_right(int new_hi) {
    if (new_hi <= hi_) return;
    hi_ = new_hi;
    rebuild();
  }

 private:
  struct Entry {
    double t;
    std::uint64_t bucket;  // floor(t * n), assigned by insert()
    std::int32_t site;
    std::uint32_t idx;
  };

  void insert(Entry e) {
    e.bucket = static_cast<std::uint64_t>(e.t * inv_width_);
    buckets_[static_cast<std::size_t>(e.bucket) & mask_].push_back(e);
  }

  // Pending times only grow, so every entry sits at or ahead of the cursor.
  Entry* find_head() {
    for (std::size_t hops = 0;; ++hops) {
      auto& bucket = buckets_[static_cast<std::size_t>(cursor_) & mask_];
      Entry* best = nullptr;
      for (auto& e : bucket)
        if (e.bucket == cursor_ &&
            (!best || e.t < best->t || (e.t == best->t && e.site < best->site)))
          best = &e;
      if (best) return best;
      cursor_ += 1;
      if (hops > buckets_.size()) {
        // sparse stretch: jump straight to the earliest pending bucket
        std::uint64_t min_bucket = ~std::uint64_t{0};
        for (const auto& b : buckets_)
          for (const auto& e : b) min_bucket = std::min(min_bucket, e.bucket);
        cursor_ = min_bucket;
        hops = 0;
      }
    }
  }

  void rebuild() {
    const std::size_t n = static_cast<std::size_t>(hi_ - lo_) + 1;
    inv_width_ = static_cast<double>(n);
    std::size_t m = 4;
    while (m < 4 * n) m <<= 1;
    mask_ = m - 1;
    std::vector<Entry> pending;
    for (auto& b : buckets_)
      for (auto& e : b) pending.push_back(e);
    buckets_.assign(m, {});
    const int known_lo = pending.empty() ? hi_ + 1 : prev_lo_;
    const int known_hi = pending.empty() ? hi_ : prev_hi_;
    for (auto& e : pending) insert(e);
    for (int s = lo_; s <= hi_; ++s) {
      if (s >= known_lo && s <= known_hi) continue;
      Entry e{ring_gap(seed_, s, 0), 0, s, 0};
      while (e.t <= last_time_) {
        e.idx += 1;
        e.t += ring_gap(seed_, s, e.idx);
      }
      insert(e);
    }
    prev_lo_ = lo_;
    prev_hi_ = hi_;
    cursor_ = static_cast<std::uint64_t>(last_time_ * inv_width_);
  }

  std::uint64_t seed_;
  double q_;
  int lo_, hi_;
  int prev_lo_ = 0, prev_hi_ = -1;
  double last_time_ = 0.0;
  double inv_width_ = 1.0;
  std::uint64_t cursor_ = 0;
  std::size_t mask_ = 0;
  std::vector<std::vector<Entry>> buckets_;
};

// Fixed finite event list with the same pull interface as EventStream,
// for deterministic scripted tests and replays.
class EventScript {
 public:
  explicit EventScript(std::vector<Event> events) : events_(std::move(events)) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) {
                       return a.time < b.time ||
                              (a.time == b.time && a.site < b.site);
                     });
    for (std::size_t i = 0; i < events_.size(); ++i)
      for (std::size_t j = i + 1; j < events_.size(); ++j)
        if (events_[i].site == events_[j].site &&
            events_[i].time >= events_[j].time)
          throw std::invalid_argument("script times must increase per site");
  }

  double peek_time() const {
    return cursor_ < events_.size() ? events_[cursor_].time
                                    : std::numeric_limits<double>::infinity();
  }

  Event pop() {
    if (cursor_ >= events_.size())
      throw std::out_of_range("script exhausted");
    return events_[cursor_++];
  }

  void extend_left(int) {}
  void extend_right(int) {}
  int lo() const { return std::numeric_limits<int>::min() / 2; }
  int hi() const { return std::numeric_limits<int>::max() / 2; }

  const std::vector<Event>& events() const { return events_; }

 private:
  std::vector<Event> events_;
  std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Recorded event logs and ring-path queries

struct EventLog {
  int lo, hi;
  double t0, t1;
  std::vector<Event> events;  // time-ordered
};

template <class Stream>
inline EventLog record_events(Stream& stream, double horizon) {
  EventLog log{stream.lo(), stream.hi(), 0.0, horizon, {}};
  while (stream.peek_time() <= horizon) log.events.push_back(stream.pop());
  return log;
}

// True iff a chain of nearest-neighbor rings with strictly increasing times
// inside [t0,t1] links x to y. Single chronological sweep: an event at z
// extends the earliest-arrival label from either neighbor.
inline bool ring_path_exists(const EventLog& log, int x, int y, double t0,
                             double t1) {
  if (x > y) throw std::invalid_argument("ring_path_exists requires x <= y");
  if (x < log.lo || y > log.hi || t0 < log.t0 || t1 > log.t1)
    throw std::domain_error("event log does not cover the requested span");
  if (x == y) return true;
  const double unreached = std::numeric_limits<double>::infinity();
  std::vector<double> reach(static_cast<std::size_t>(log.hi - log.lo + 1),
                            unreached);
  auto at = [&](int s) -> double& {
    return reach[static_cast<std::size_t>(s - log.lo)];
  };
  // the source needs no ring of its own; allow the first link at exactly t0
  at(x) = std::nextafter(t0, -unreached);
  for (const Event& e : log.events) {
    if (e.time < t0) continue;
    if (e.time > t1) break;
    double best = unreached;
    if (e.site > log.lo) best = std::min(best, at(e.site - 1));
    if (e.site < log.hi) best = std::min(best, at(e.site + 1));
    if (best < e.time) at(e.site) = std::min(at(e.site), e.time);
  }
  return at(y) <= t1;
}

// ---------------------------------------------------------------------------
// CSV interchange: columns site,time,mark with full-precision times.

inline void write_event_csv(std::ostream& os, const std::vector<Event>& events) {
  os << "site,time,mark\n";
  char buf[64];
  for (const Event& e : events) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%d\n", e.site, e.time, e.mark);
    os << buf;
  }
}

inline std::vector<Event> read_event_csv(std::istream& is) {
  std::vector<Event> events;
  std::string line;
  if (!std::getline(is, line) || line.rfind("site,time,mark", 0) != 0)
    throw std::invalid_argument("bad event CSV header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Event e{};
    if (std::sscanf(line.c_str(), "%d,%lf,%d", &e.site, &e.time, &e.mark) != 3)
      throw std::invalid_argument("bad event CSV row: " + line);
    events.push_back(e);
  }
  return events;
}

}  // namespace kcm
