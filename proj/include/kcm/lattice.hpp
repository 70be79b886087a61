#pragma once

// One-dimensional spin configurations with explicit boundary semantics.
// Occupancy convention: 1 = particle, 0 = empty site.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kcm {

enum class Boundary {
  Interval,      // sites [1,L] stored, frozen zeros at 0 and L+1, ones beyond
  LeftHalfLine,  // sites [lo,-1] stored, frozen zero at 0, ghost ones elsewhere
  SeenFromFront, // site 0 is the front (empty), ghost ones left and right
  FullLine,      // sites [lo,hi] stored, ghost ones on both sides
};

struct SimParams {
  double q = 0.9;                 // flip-to-empty rate
  double p() const { return 1.0 - q; }
  static constexpr double q_bar = 0.76;  // contact-process survival threshold
};

class SpinConfig {
 public:
  static SpinConfig interval_filled(int L, int value) {
    require(L >= 1, "Interval requires L >= 1");
    SpinConfig c(Boundary::Interval, 1, L);
    c.L_ = L;
    c.fill(value);
    return c;
  }

  static SpinConfig interval(int L, std::string_view bits) {
    require(L >= 1, "Interval requires L >= 1");
    require(static_cast<int>(bits.size()) == L, "bit string length must be L");
    SpinConfig c(Boundary::Interval, 1, L);
    c.L_ = L;
    c.fill(1);
    for (int i = 0; i < L; ++i) c.set(1 + i, bits[i] == '1' ? 1 : 0);
    return c;
  }

  // Stored sites lo..-1; empty bits with lo == 0 gives the delta_0 state.
  static SpinConfig half_line(int lo, std::string_view bits) {
    require(lo <= 0, "half-line window must end at -1");
    require(static_cast<int>(bits.size()) == -lo, "bits must cover [lo,-1]");
    SpinConfig c(Boundary::LeftHalfLine, lo, -1);
    c.fill(1);
    for (int i = 0; i < -lo; ++i) c.set(lo + i, bits[i] == '1' ? 1 : 0);
    return c;
  }

  static SpinConfig delta_origin() { return half_line(0, ""); }

  static SpinConfig full_line(int lo, std::string_view bits) {
    require(!bits.empty(), "full-line config needs at least one stored site");
    SpinConfig c(Boundary::FullLine, lo, lo + static_cast<int>(bits.size()) - 1);
    c.fill(1);
    for (std::size_t i = 0; i < bits.size(); ++i)
      c.set(lo + static_cast<int>(i), bits[i] == '1' ? 1 : 0);
    return c;
  }

  static SpinConfig seen_window(std::string_view bits) {
    SpinConfig c(Boundary::SeenFromFront, 1,
                 std::max<int>(1, static_cast<int>(bits.size())));
    c.fill(1);
    for (std::size_t i = 0; i < bits.size(); ++i)
      c.set(1 + static_cast<int>(i), bits[i] == '1' ? 1 : 0);
    return c;
  }

  Boundary kind() const { return kind_; }
  int lo() const { return lo_; }
  int hi() const { return hi_; }
  int length() const { return L_; }  // Interval only

  // Occupancy at any site, resolved through the boundary convention.
  int value(int x) const {
    switch (kind_) {
      case Boundary::Interval:
        if (x == 0 || x == L_ + 1) return 0;
        if (x < 0 || x > L_ + 1) return 1;
        return bit(x);
      case Boundary::LeftHalfLine:
        if (x >= 0) return x == 0 ? 0 : 1;
        if (x < lo_) return 1;
        return bit(x);
      case Boundary::SeenFromFront:
        if (x <= 0) return x == 0 ? 0 : 1;
        if (x > hi_) return 1;
        return bit(x);
      case Boundary::FullLine:
        if (x < lo_ || x > hi_) return 1;
        return bit(x);
    }
    return 1;
  }

  bool is_stored(int x) const { return x >= lo_ && x <= hi_; }

  bool is_dynamic(int x) const {
    switch (kind_) {
      case Boundary::Interval: return x >= 1 && x <= L_;
      case Boundary::LeftHalfLine: return x >= lo_ && x <= -1;
      case Boundary::FullLine: return x >= lo_ && x <= hi_;
      case Boundary::SeenFromFront: return false;
    }
    return false;
  }

  void set(int x, int v) {
    if (!is_stored(x)) throw std::domain_error("set outside stored window");
    const int i = x - base_;
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    if (v)
      words_[i >> 6] |= m;
    else
      words_[i >> 6] &= ~m;
  }

  // Extends the stored window leftward; new sites are occupied.
  void grow_left(int new_lo) {
    if (new_lo >= lo_) return;
    if (kind_ != Boundary::LeftHalfLine && kind_ != Boundary::FullLine)
      throw std::domain_error("window growth only on half/full line");
    const int new_base = floor64(new_lo);
    if (new_base < base_) {
      const std::size_t extra = static_cast<std::size_t>(base_ - new_base) / 64;
      words_.insert(words_.begin(), extra, ~std::uint64_t{0});
      base_ = new_base;
    }
    lo_ = new_lo;
  }

  void grow_right(int new_hi) {
    if (new_hi <= hi_) return;
    if (kind_ != Boundary::FullLine)
      throw std::domain_error("rightward growth only on full line");
    const int need = new_hi - base_ + 1;
    while (static_cast<int>(words_.size()) * 64 < need)
      words_.push_back(~std::uint64_t{0});
    hi_ = new_hi;
  }

  // Smallest site with value 0 under the boundary convention.
  int front() const {
    switch (kind_) {
      case Boundary::Interval:
      case Boundary::SeenFromFront:
        return 0;
      case Boundary::LeftHalfLine: {
        const int z = leftmost_stored_zero();
        return z == no_site ? 0 : std::min(z, 0);
      }
      case Boundary::FullLine: {
        const int z = leftmost_stored_zero();
        if (z == no_site) throw std::domain_error("full-line config has no empty site");
        return z;
      }
    }
    return 0;
  }

  bool has_empty_stored() const { return leftmost_stored_zero() != no_site; }

  // First site >= x with value 0, or `no_site`; scans stored window only,
  // then falls back to the boundary rule for Interval/half-line.
  int next_zero_at_or_after(int x) const {
    for (int y = std::max(x, lo_); y <= hi_; ++y)
      if (bit(y) == 0) return y;
    if (kind_ == Boundary::LeftHalfLine && x <= 0) return 0;
    if (kind_ == Boundary::Interval && x <= L_ + 1) return std::max(x, 0) == 0 ? 0 : L_ + 1;
    return no_site;
  }

  // Last stored site <= x with value 0, or `no_site`.
  int last_zero_at_or_before(int x) const {
    for (int y = std::min(x, hi_); y >= lo_; --y)
      if (bit(y) == 0) return y;
    return no_site;
  }

  static constexpr int no_site = std::numeric_limits<int>::min();

  std::string to_literal() const;
  static SpinConfig parse(std::string_view literal);

  bool operator==(const SpinConfig& o) const {
    if (kind_ != o.kind_ || lo_ != o.lo_ || hi_ != o.hi_ || L_ != o.L_) return false;
    for (int x = lo_; x <= hi_; ++x)
      if (bit(x) != o.bit(x)) return false;
    return true;
  }

 private:
  SpinConfig(Boundary k, int lo, int hi) : kind_(k), lo_(lo), hi_(hi) {
    base_ = floor64(lo_);
    const int n = std::max(0, hi_ - base_ + 1);
    words_.assign(static_cast<std::size_t>((n + 63) / 64), ~std::uint64_t{0});
    if (words_.empty()) words_.push_back(~std::uint64_t{0});
  }

  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  static int floor64(int x) {
    return (x >= 0 ? x / 64 : -((-x + 63) / 64)) * 64;
  }

  int bit(int x) const {
    const int i = x - base_;
    return static_cast<int>((words_[i >> 6] >> (i & 63)) & 1u);
  }

  void fill(int v) {
    for (int x = lo_; x <= hi_; ++x) set(x, v);
  }

  int leftmost_stored_zero() const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t inv = ~words_[w];
      while (inv) {
        const int b = std::countr_zero(inv);
        const int x = base_ + static_cast<int>(w) * 64 + b;
        if (x >= lo_ && x <= hi_) return x;
        inv &= inv - 1;
      }
    }
    return no_site;
  }

  Boundary kind_;
  int lo_, hi_;
  int L_ = 0;
  int base_;
  std::vector<std::uint64_t> words_;
};

// ---------------------------------------------------------------------------
// Static observables

inline int front(const SpinConfig& c) { return c.front(); }

// B(sigma): longest run of occupied sites in [1,L].
inline int largest_cluster(const SpinConfig& c) {
  if (c.kind() != Boundary::Interval)
    throw std::domain_error("largest_cluster requires an Interval config");
  int best = 0, run = 0;
  for (int x = 1; x <= c.length(); ++x) {
    run = c.value(x) ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

// Membership in H(a,b,ell): every x in [a, b-ell+1] has an empty site within
// [x, x+ell-1].
inline bool in_H(const SpinConfig& c, int a, int b, int ell) {
  if (ell < 1) throw std::invalid_argument("in_H requires ell >= 1");
  if (b - a + 1 < ell) return true;  // vacuous quantifier
  int last_needed = b - ell + 1;
  int x = a;
  while (x <= last_needed) {
    int z = SpinConfig::no_site;
    for (int y = x; y <= x + ell - 1; ++y)
      if (c.value(y) == 0) { z = y; break; }
    if (z == SpinConfig::no_site) return false;
    // every x' with x' <= z and x' + ell - 1 >= z is satisfied by z
    x = z + 1;
  }
  return true;
}

inline SpinConfig seen_from_front(const SpinConfig& c) {
  const int X = c.front();
  int last;  // rightmost input site carried into the view
  switch (c.kind()) {
    case Boundary::SeenFromFront: return c;
    case Boundary::LeftHalfLine: last = 0; break;
    case Boundary::Interval: last = c.length() + 1; break;
    case Boundary::FullLine: last = c.hi(); break;
    default: throw std::domain_error("front undefined");
  }
  std::string bits;
  for (int y = X + 1; y <= last; ++y) bits.push_back(c.value(y) ? '1' : '0');
  return SpinConfig::seen_window(bits);
}

struct ClusterDecomposition {
  // Maximal intervals [a,b] with empty endpoints, occupied interior of
  // length >= threshold, left to right.
  std::vector<std::pair<int, int>> clusters;
  int p = 0;        // number of clusters
  int min_gap = 0;  // min over clusters of b - a
  // Front-meeting time scale for the smallest cluster, given speed v and
  // CLT window constant a.
  double t(double v, double a) const {
    if (p == 0) return 0.0;
    const double ell = static_cast<double>(min_gap);
    return ell / (2.0 * v) - (2.0 * a / v) * std::sqrt(ell);
  }
};

inline ClusterDecomposition cluster_decomposition(const SpinConfig& c,
                                                  int threshold) {
  if (c.kind() != Boundary::Interval)
    throw std::domain_error("cluster_decomposition requires an Interval config");
  if (threshold < 1) throw std::domain_error("threshold must be >= 1");
  ClusterDecomposition out;
  const int L = c.length();
  int a = 0;  // last empty site seen (site 0 is the frozen boundary zero)
  for (int x = 1; x <= L + 1; ++x) {
    if (c.value(x) == 0) {
      if (x - a - 1 >= threshold) out.clusters.emplace_back(a, x);
      a = x;
    }
  }
  out.p = static_cast<int>(out.clusters.size());
  int mg = std::numeric_limits<int>::max();
  for (auto& [ca, cb] : out.clusters) mg = std::min(mg, cb - ca);
  out.min_gap = out.clusters.empty() ? 0 : mg;
  return out;
}

// mu-probability of an exact occupancy pattern under the Bernoulli(p) product.
inline double product_cylinder_prob(std::string_view pattern, double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("density out of [0,1]");
  double prob = 1.0;
  for (char b : pattern) prob *= (b == '1') ? p : 1.0 - p;
  return prob;
}

// ---------------------------------------------------------------------------
// Textual configuration literals

inline std::string SpinConfig::to_literal() const {
  std::string bits;
  for (int x = lo_; x <= hi_; ++x) bits.push_back(bit(x) ? '1' : '0');
  switch (kind_) {
    case Boundary::Interval: return "interval:" + bits;
    case Boundary::LeftHalfLine:
      return "halfline:..." + bits + "@" + std::to_string(lo_);
    case Boundary::SeenFromFront: return "front:" + bits;
    case Boundary::FullLine:
      return "fullline:" + bits + "@" + std::to_string(lo_);
  }
  return {};
}

inline SpinConfig SpinConfig::parse(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("config literal needs a boundary tag");
  const std::string_view tag = s.substr(0, colon);
  std::string_view rest = s.substr(colon + 1);
  auto check_bits = [](std::string_view b) {
    for (char c : b)
      if (c != '0' && c != '1')
        throw std::invalid_argument("config bits must be 0/1");
  };
  if (tag == "interval") {
    check_bits(rest);
    if (rest.empty()) throw std::invalid_argument("interval literal is empty");
    return interval(static_cast<int>(rest.size()), rest);
  }
  if (tag == "front") {
    check_bits(rest);
    return seen_window(rest);
  }
  if (tag == "halfline" || tag == "fullline") {
    if (tag == "halfline") {
      if (rest.substr(0, 3) != "...")
        throw std::invalid_argument("half-line literal starts with '...'");
      rest = rest.substr(3);
    }
    auto at = rest.find('@');
    if (at == std::string_view::npos)
      throw std::invalid_argument("literal needs '@start'");
    const std::string_view bits = rest.substr(0, at);
    check_bits(bits);
    int start = 0;
    try {
      start = std::stoi(std::string(rest.substr(at + 1)));
    } catch (...) {
      throw std::invalid_argument("bad start index in literal");
    }
    if (tag == "halfline") {
      if (start + static_cast<int>(bits.size()) != 0)
        throw std::invalid_argument("half-line bits must cover [start,-1]");
      return half_line(start, bits);
    }
    return full_line(start, bits);
  }
  throw std::invalid_argument("unknown boundary tag");
}

}  // namespace kcm
