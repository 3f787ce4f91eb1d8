#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rfbsde {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform in the open interval (0, 1) built from the top 53 bits.
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Counter-based standard normal draw keyed by (seed, stream, counter).
///
/// Every draw is a pure function of its key, so paths can be generated in any
/// order or in parallel and still reproduce bit-for-bit.
inline double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  const std::uint64_t key = mix64(seed ^ mix64(stream ^ mix64(counter)));
  const double u1 = to_open_unit(mix64(key));
  const double u2 = to_open_unit(mix64(key ^ 0xd1b54a32d192ed03ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  return to_open_unit(mix64(seed ^ mix64(stream ^ mix64(counter + 0x632be59bd9b4e019ULL))));
}

}  // namespace rfbsde
