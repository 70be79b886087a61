#pragma once

// Counter-based random numbers: every draw is a pure function of
// (seed, site, event index), so per-site streams are random-access and
// independent of window growth or replay order.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace kcm {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// 64-bit value fully determined by the key triple.
inline std::uint64_t counter_bits(std::uint64_t seed, std::int64_t site,
                                  std::uint64_t index) {
  std::uint64_t h = detail::splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(site));
  h = detail::splitmix64(h ^ index);
  return h;
}

// Uniform in (0,1), never exactly 0 or 1.
inline double counter_u01(std::uint64_t seed, std::int64_t site,
                          std::uint64_t index) {
  return (static_cast<double>(counter_bits(seed, site, index) >> 11) + 0.5) *
         0x1.0p-53;
}

// Exp(1) inter-ring gap for event n at a site.
inline double ring_gap(std::uint64_t seed, std::int64_t site, std::uint64_t n) {
  return -std::log(counter_u01(seed, site, 2 * n));
}

// Bernoulli(1-q) refresh mark for event n at a site.
inline int ring_mark(std::uint64_t seed, std::int64_t site, std::uint64_t n,
                     double q) {
  return counter_u01(seed, site, 2 * n + 1) < 1.0 - q ? 1 : 0;
}

// Stable seed derivation: hash(master, tag, trial index). Documented contract
// of the experiment harness; do not change the constants.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t trial) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag bytes
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h = detail::splitmix64(h ^ master);
  return detail::splitmix64(h ^ trial);
}

}  // namespace kcm
