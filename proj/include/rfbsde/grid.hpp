#pragma once

#include <cstddef>

namespace rfbsde {

/// Uniform time grid r_0 = t0 < ... < r_N = t1.
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  std::size_t steps = 1;

  double dt() const { return (t1 - t0) / static_cast<double>(steps); }
  double node(std::size_t i) const { return i == steps ? t1 : t0 + dt() * static_cast<double>(i); }
  /// Throws ConfigError unless 0 <= t0 < t1 and steps > 0.
  void check() const;
};

/// Tensor grid on [t0, t1] x [x_lo, x_hi] for scalar-state surfaces.
struct SpaceTimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  std::size_t time_steps = 2;
  double x_lo = -1.0;
  double x_hi = 1.0;
  std::size_t space_steps = 2;

  double dt() const { return (t1 - t0) / static_cast<double>(time_steps); }
  double dx() const { return (x_hi - x_lo) / static_cast<double>(space_steps); }
  double t(std::size_t i) const { return i == time_steps ? t1 : t0 + dt() * static_cast<double>(i); }
  double x(std::size_t j) const { return j == space_steps ? x_hi : x_lo + dx() * static_cast<double>(j); }
  std::size_t rows() const { return time_steps + 1; }
  std::size_t cols() const { return space_steps + 1; }
  std::size_t index(std::size_t i, std::size_t j) const { return i * cols() + j; }

  /// Nearest node indices, clamped to the grid (constant extrapolation).
  std::size_t nearest_time(double t) const;
  std::size_t nearest_space(double x) const;

  /// Throws ConfigError unless both axes have at least 2 steps and a nondegenerate range.
  void check() const;
};

bool operator==(const SpaceTimeGrid& a, const SpaceTimeGrid& b);

}  // namespace rfbsde
