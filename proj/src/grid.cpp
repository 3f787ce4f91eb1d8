#include "rfbsde/grid.hpp"

#include <algorithm>
#include <cmath>

#include "rfbsde/error.hpp"

namespace rfbsde {

void TimeGrid::check() const {
  if (!(t0 >= 0.0) || !(t1 > t0) || !std::isfinite(t1))
    throw ConfigError("E_TIME_GRID", "time grid needs 0 <= t0 < t1");
  if (steps == 0) throw ConfigError("E_TIME_GRID", "time grid needs at least one step");
}

std::size_t SpaceTimeGrid::nearest_time(double t) const {
  const double s = std::round((t - t0) / dt());
  return static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(time_steps)));
}

std::size_t SpaceTimeGrid::nearest_space(double xv) const {
  const double s = std::round((xv - x_lo) / dx());
  return static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(space_steps)));
}

void SpaceTimeGrid::check() const {
  if (time_steps < 2 || space_steps < 2)
    throw ConfigError("E_SPACE_TIME_GRID", "space-time grid needs at least 2 steps per axis");
  if (!(t1 > t0) || !(x_hi > x_lo) || !std::isfinite(x_lo) || !std::isfinite(x_hi))
    throw ConfigError("E_SPACE_TIME_GRID", "space-time grid needs a nondegenerate box");
}

bool operator==(const SpaceTimeGrid& a, const SpaceTimeGrid& b) {
  return a.t0 == b.t0 && a.t1 == b.t1 && a.time_steps == b.time_steps && a.x_lo == b.x_lo && a.x_hi == b.x_hi &&
         a.space_steps == b.space_steps;
}

}  // namespace rfbsde
