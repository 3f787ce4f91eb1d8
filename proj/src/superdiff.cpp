#include <algorithm>
#include <cmath>
#include <limits>

#include "rfbsde/csv.hpp"
#include "rfbsde/error.hpp"
#include "rfbsde/random.hpp"
#include "rfbsde/verify.hpp"

namespace rfbsde {

std::string to_string(Membership m) {
  switch (m) {
    case Membership::member: return "member";
    case Membership::non_member: return "non-member";
    case Membership::inconclusive: return "inconclusive";
  }
  return "?";
}

std::vector<double> MembershipProbe::default_radii() {
  std::vector<double> r;
  for (int k = 0; k <= 12; ++k) r.push_back(std::pow(10.0, -2.0 - 0.5 * k));
  return r;
}

MembershipResult check_superdiff_membership(const ValueSurface& surface, const SuperdiffCandidate& c,
                                            const MembershipProbe& probe) {
  if (probe.radii.empty()) throw ConfigError("E_PROBE_RADII", "membership probe needs at least one radius");
  if (probe.samples < 1) throw ConfigError("E_PROBE_SAMPLES", "membership probe needs samples");
  for (std::size_t k = 0; k < probe.radii.size(); ++k)
    if (!(probe.radii[k] > 0.0) || (k > 0 && probe.radii[k] >= probe.radii[k - 1]))
      throw ConfigError("E_PROBE_RADII", "probe radii must be positive and strictly decreasing");
  const auto& g = surface.grid();
  if (c.t < g.t0 || c.t > g.t1 || c.x < g.x_lo || c.x > g.x_hi)
    throw ConfigError("E_PROBE_DOMAIN", "probe point lies outside the surface domain");

  const bool two_sided = probe.time == TimeProbe::two_sided;
  const double sign = probe.kind == DiffKind::super ? 1.0 : -1.0;
  double room = std::min({g.t1 - c.t, (c.x - g.x_lo) * (c.x - g.x_lo), (g.x_hi - c.x) * (g.x_hi - c.x)});
  if (two_sided) room = std::min(room, c.t - g.t0);

  MembershipResult res;
  if (!(room > 0.0)) {
    res.verdict = Membership::inconclusive;
    res.margin = std::numeric_limits<double>::infinity();
    res.note = "no room to probe inside the surface box";
    return res;
  }

  const double w0 = surface.value_at(c.t, c.x);
  auto quotient = [&](double s, double y) {
    const double ds = s - c.t, dy = y - c.x;
    const double num = surface.value_at(s, y) - w0 - c.q * ds - c.p * dy - 0.5 * c.P * dy * dy;
    return sign * num / (std::fabs(ds) + dy * dy);
  };

  bool shrunk = false;
  for (std::size_t k = 0; k < probe.radii.size(); ++k) {
    double rho = probe.radii[k];
    if (rho > room) {
      rho = room;
      shrunk = true;
    }
    const double sr = std::sqrt(rho);
    // Fixed corners: pure time step, spatial step with a tiny time step, and the full box corner.
    std::vector<std::pair<double, double>> offsets = {{rho, 0.0}, {rho, sr}, {rho, -sr}, {1e-6 * rho, sr},
                                                      {1e-6 * rho, -sr}};
    for (int m = 0; m < probe.samples; ++m) {
      const double u1 = counter_uniform(probe.seed, k, 2 * static_cast<std::uint64_t>(m));
      const double u2 = counter_uniform(probe.seed, k, 2 * static_cast<std::uint64_t>(m) + 1);
      offsets.emplace_back(rho * u1, sr * (2.0 * u2 - 1.0));
    }
    double qmax = -std::numeric_limits<double>::infinity();
    for (const auto& [ds, dy] : offsets) {
      qmax = std::max(qmax, quotient(c.t + ds, c.x + dy));
      if (two_sided) qmax = std::max(qmax, quotient(c.t - ds, c.x + dy));
    }
    res.radii.push_back(rho);
    res.max_quotient.push_back(qmax);
  }
  if (shrunk) res.note = "radii shrunk to stay inside the surface box";

  const std::size_t K = res.radii.size();
  const std::size_t tail = std::min<std::size_t>(K, static_cast<std::size_t>(std::max(1, probe.tail)));
  res.margin = -std::numeric_limits<double>::infinity();
  for (std::size_t k = K - tail; k < K; ++k)
    res.margin = std::max(res.margin, res.max_quotient[k] - probe.slope_budget * std::sqrt(res.radii[k]));

  // Reported trend fit Q ~ a + c sqrt(rho), c >= 0.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double xk = std::sqrt(res.radii[k]), yk = res.max_quotient[k];
    sx += xk, sy += yk, sxx += xk * xk, sxy += xk * yk;
  }
  const double n = static_cast<double>(K);
  const double den = n * sxx - sx * sx;
  double slope = den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  double intercept = (sy - slope * sx) / n;
  if (slope < 0.0) {
    slope = 0.0;
    intercept = res.max_quotient.back();
  }
  res.fitted_slope = slope;
  res.fitted_intercept = intercept;

  if (res.margin <= probe.tol) {
    res.verdict = Membership::member;
  } else if (res.max_quotient.back() > probe.nonmember_floor) {
    res.verdict = Membership::non_member;
  } else {
    res.verdict = Membership::inconclusive;
  }
  return res;
}

}  // namespace rfbsde
