#include "rfbsde/model.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "rfbsde/error.hpp"
#include "rfbsde/random.hpp"

namespace rfbsde {

ControlSet::ControlSet(std::vector<Interval> bounds, std::vector<int> grid_points)
    : bounds_(std::move(bounds)), grid_points_(std::move(grid_points)) {
  if (bounds_.empty()) throw ConfigError("E_CONTROL_SET", "control set must be nonempty");
  if (grid_points_.size() != bounds_.size())
    throw ConfigError("E_CONTROL_SET", "control grid needs one point count per coordinate");
  for (std::size_t k = 0; k < bounds_.size(); ++k) {
    const auto& iv = bounds_[k];
    if (!(iv.lo <= iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
      throw ConfigError("E_CONTROL_SET", "control interval must satisfy lo <= hi and be finite");
    if (iv.lo == iv.hi) {
      grid_points_[k] = 1;
    } else if (grid_points_[k] < 2) {
      throw ConfigError("E_CONTROL_SET", "nondegenerate control interval needs at least 2 grid points");
    }
  }

  // Lexicographic enumeration, first coordinate most significant.
  const int m = dim();
  std::size_t total = 1;
  for (int p : grid_points_) total *= static_cast<std::size_t>(p);
  grid_.resize(total * static_cast<std::size_t>(m));
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  for (std::size_t g = 0; g < total; ++g) {
    for (int k = 0; k < m; ++k) {
      const auto& iv = bounds_[static_cast<std::size_t>(k)];
      const int pts = grid_points_[static_cast<std::size_t>(k)];
      const int i = idx[static_cast<std::size_t>(k)];
      double v = iv.lo;
      if (pts > 1) v = (i == pts - 1) ? iv.hi : iv.lo + (iv.hi - iv.lo) * i / (pts - 1);
      grid_[g * static_cast<std::size_t>(m) + static_cast<std::size_t>(k)] = v;
    }
    for (int k = m - 1; k >= 0; --k) {
      if (++idx[static_cast<std::size_t>(k)] < grid_points_[static_cast<std::size_t>(k)]) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
  }
}

ControlSet ControlSet::interval(double lo, double hi, int points) {
  return ControlSet({Interval{lo, hi}}, {points});
}

std::span<const double> ControlSet::grid_point(std::size_t k) const {
  const auto m = static_cast<std::size_t>(dim());
  return std::span<const double>(grid_).subspan(k * m, m);
}

bool ControlSet::contains(std::span<const double> u, double tol) const {
  if (u.size() != bounds_.size()) return false;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!(u[k] >= bounds_[k].lo - tol && u[k] <= bounds_[k].hi + tol)) return false;
  }
  return true;
}

void ControlSet::project(std::span<double> u) const {
  for (std::size_t k = 0; k < u.size() && k < bounds_.size(); ++k)
    u[k] = std::clamp(u[k], bounds_[k].lo, bounds_[k].hi);
}

double ControlSet::max_width() const {
  double w = 0.0;
  for (const auto& iv : bounds_) w = std::max(w, iv.hi - iv.lo);
  return w;
}

double ControlModel::b(double r, double x, double u) const {
  double out = 0.0;
  drift(r, std::span<const double>(&x, 1), std::span<const double>(&u, 1), std::span<double>(&out, 1));
  return out;
}

double ControlModel::sigma(double r, double x, double u) const {
  double out = 0.0;
  diffusion(r, std::span<const double>(&x, 1), std::span<const double>(&u, 1), std::span<double>(&out, 1));
  return out;
}

double ControlModel::f(double r, double x, double y, double z, double u) const {
  return driver(r, std::span<const double>(&x, 1), y, std::span<const double>(&z, 1),
                std::span<const double>(&u, 1));
}

double ControlModel::phi(double x) const { return terminal(std::span<const double>(&x, 1)); }

double ControlModel::h(double r, double x) const { return obstacle(r, std::span<const double>(&x, 1)); }

void ControlModel::check() const {
  if (!drift || !diffusion || !driver || !terminal || !obstacle)
    throw ConfigError("E_MODEL_INCOMPLETE", "model '" + name + "' is missing a coefficient");
  if (state_dim < 1 || noise_dim < 1)
    throw ConfigError("E_MODEL_DIMS", "model '" + name + "' needs positive state and noise dimensions");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ConfigError("E_MODEL_HORIZON", "model '" + name + "' needs a positive finite horizon");
  if (controls.dim() < 1) throw ConfigError("E_CONTROL_SET", "model '" + name + "' has an empty control set");
}

std::vector<double> generator_matrix(const ControlModel& model, double r, std::span<const double> x,
                                     std::span<const double> u) {
  const auto n = static_cast<std::size_t>(model.state_dim);
  const auto d = static_cast<std::size_t>(model.noise_dim);
  std::vector<double> sig(n * d);
  model.diffusion(r, x, u, sig);
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += sig[i * d + k] * sig[j * d + k];
      a[i * n + j] = 0.5 * s;
    }
  return a;
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::unchecked: return "unchecked";
  }
  return "unknown";
}

bool AssumptionReport::all_measured_pass() const {
  return std::none_of(entries.begin(), entries.end(),
                      [](const AssumptionEntry& e) { return e.status == CheckStatus::fail; });
}

const AssumptionEntry* AssumptionReport::find(const std::string& name, const std::string& clause_prefix) const {
  for (const auto& e : entries)
    if (e.name == name && e.clause.rfind(clause_prefix, 0) == 0) return &e;
  return nullptr;
}

namespace {

double norm2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Tracks the largest ratio seen and where; a non-finite evaluation latches failure.
struct RatioTracker {
  AssumptionEntry entry;
  bool non_finite = false;

  void observe(double numerator, double denominator, const std::vector<double>& point) {
    if (non_finite) return;
    if (!std::isfinite(numerator)) {
      non_finite = true;
      entry.worst_point = point;
      entry.measured = std::numeric_limits<double>::infinity();
      entry.note = "non-finite coefficient evaluation";
      return;
    }
    if (denominator <= 0.0) return;
    const double ratio = numerator / denominator;
    if (ratio > entry.measured || entry.worst_point.empty()) {
      entry.measured = std::max(entry.measured, ratio);
      entry.worst_point = point;
    }
  }

  AssumptionEntry finish(double cap) {
    entry.status = (non_finite || entry.measured > cap) ? CheckStatus::fail : CheckStatus::pass;
    if (!non_finite && entry.measured > cap) entry.note = "difference quotient exceeds cap";
    return entry;
  }
};

class ProbeSampler {
 public:
  ProbeSampler(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  double in(const Interval& iv) { return iv.lo + (iv.hi - iv.lo) * counter_uniform(seed_, stream_, counter_++); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace

AssumptionReport validate_assumptions(const ControlModel& model, const ProbeBox& probe, std::uint64_t seed) {
  model.check();
  const auto n = static_cast<std::size_t>(model.state_dim);
  const auto d = static_cast<std::size_t>(model.noise_dim);
  const auto m = static_cast<std::size_t>(model.control_dim());

  std::vector<Interval> ubox = model.controls.bounds();
  if (probe.control) ubox.assign(m, *probe.control);

  RatioTracker h1{{"H1", "(ii) b, sigma Lipschitz in x"}};
  RatioTracker h2f{{"H2", "(ii) f Lipschitz in (x, y, z)"}};
  RatioTracker h2phi{{"H2", "(ii) Phi Lipschitz"}};
  RatioTracker h2h{{"H2", "(ii) h Lipschitz in x"}};
  RatioTracker h3{{"H3", "Lipschitz in u"}};

  ProbeSampler rng(seed, 0x4153534dULL);
  std::vector<double> x(n), x2(n), u(m), u2(m), z(d), z2(d);
  std::vector<double> b1(n), b2(n), s1(n * d), s2(n * d);

  auto point = [&](double r) {
    std::vector<double> p{r};
    p.insert(p.end(), x.begin(), x.end());
    p.insert(p.end(), u.begin(), u.end());
    return p;
  };

  for (int s = 0; s < probe.samples; ++s) {
    const bool local = (s % 2) == 1;
    const double r = rng.in(probe.time);
    const double y = rng.in(probe.y);
    for (std::size_t k = 0; k < n; ++k) x[k] = rng.in(probe.state);
    for (std::size_t k = 0; k < m; ++k) u[k] = rng.in(ubox[k]);
    for (std::size_t k = 0; k < d; ++k) z[k] = rng.in(probe.z);
    double y2 = rng.in(probe.y);
    for (std::size_t k = 0; k < n; ++k) {
      const double w = probe.state.hi - probe.state.lo;
      x2[k] = local ? std::clamp(x[k] + 1e-3 * w * (2.0 * rng.in({0.0, 1.0}) - 1.0), probe.state.lo, probe.state.hi)
                    : rng.in(probe.state);
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double w = ubox[k].hi - ubox[k].lo;
      u2[k] = local ? std::clamp(u[k] + 1e-3 * w * (2.0 * rng.in({0.0, 1.0}) - 1.0), ubox[k].lo, ubox[k].hi)
                    : rng.in(ubox[k]);
    }
    for (std::size_t k = 0; k < d; ++k) z2[k] = local ? z[k] + 1e-3 * (2.0 * rng.in({0.0, 1.0}) - 1.0) : rng.in(probe.z);
    if (local) y2 = y + 1e-3 * (2.0 * rng.in({0.0, 1.0}) - 1.0);

    const auto pt = point(r);

    // H1 (ii): same (r, u), different x.
    model.drift(r, x, u, b1);
    model.drift(r, x2, u, b2);
    model.diffusion(r, x, u, s1);
    model.diffusion(r, x2, u, s2);
    const double dx = norm2(x, x2);
    double num = norm2(b1, b2) + norm2(s1, s2);
    if (!all_finite(b1) || !all_finite(b2) || !all_finite(s1) || !all_finite(s2))
      num = std::numeric_limits<double>::quiet_NaN();
    h1.observe(num, dx, pt);

    // H2 (ii): f in (x, y, z) at fixed (r, u); Phi and h in x.
    const double f1 = model.driver(r, x, y, z, u);
    const double f2 = model.driver(r, x2, y2, z2, u);
    h2f.observe(std::fabs(f1 - f2), dx + std::fabs(y - y2) + norm2(z, z2), pt);
    h2phi.observe(std::fabs(model.terminal(x) - model.terminal(x2)), dx, pt);
    h2h.observe(std::fabs(model.obstacle(r, x) - model.obstacle(r, x2)), dx, pt);

    // H3: Lipschitz in u at fixed (r, x, y, z).
    model.drift(r, x, u2, b2);
    model.diffusion(r, x, u2, s2);
    const double f3 = model.driver(r, x, y, z, u2);
    double num_u = norm2(b1, b2) + norm2(s1, s2) + std::fabs(f1 - f3);
    if (!all_finite(b2) || !all_finite(s2)) num_u = std::numeric_limits<double>::quiet_NaN();
    h3.observe(num_u, norm2(u, u2), pt);
  }

  AssumptionReport report;
  report.entries.push_back(h1.finish(probe.lipschitz_cap));
  report.entries.push_back(h2f.finish(probe.lipschitz_cap));
  report.entries.push_back(h2phi.finish(probe.lipschitz_cap));
  report.entries.push_back(h2h.finish(probe.lipschitz_cap));

  // H2 (iii): Phi(x) <= h(T, x) on an even grid of the state box plus random points.
  AssumptionEntry terminal{"H2", "(iii) Phi <= h(T, .)"};
  terminal.measured = -std::numeric_limits<double>::infinity();
  const int grid_pts = std::max(2, probe.samples);
  for (int s = 0; s < grid_pts; ++s) {
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = (s % 2 == 0) ? probe.state.lo + (probe.state.hi - probe.state.lo) * s / (grid_pts - 1)
                          : rng.in(probe.state);
    }
    const double gap = model.terminal(x) - model.obstacle(model.horizon, x);
    if (!std::isfinite(gap)) {
      terminal.measured = std::numeric_limits<double>::infinity();
      terminal.worst_point = x;
      terminal.note = "non-finite evaluation";
      break;
    }
    if (gap > terminal.measured) {
      terminal.measured = gap;
      terminal.worst_point = x;
    }
  }
  terminal.status = terminal.measured <= 0.0 ? CheckStatus::pass : CheckStatus::fail;
  if (terminal.status == CheckStatus::fail && terminal.note.empty())
    terminal.note = "terminal value exceeds obstacle at probed state";
  report.entries.push_back(terminal);

  report.entries.push_back(h3.finish(probe.lipschitz_cap));

  const std::pair<const char*, bool> declared[] = {
      {"A1", model.flags.a1}, {"A2", model.flags.a2}, {"A3", model.flags.a3}, {"A4", model.flags.a4}};
  for (const auto& [label, flag] : declared) {
    AssumptionEntry e{label, "declared"};
    e.status = CheckStatus::unchecked;
    e.note = flag ? "declared by model" : "not declared";
    report.entries.push_back(e);
  }
  return report;
}

namespace {

ControlModel scalar_model(std::string name, double horizon, ControlSet controls,
                          std::function<double(double, double, double)> b,
                          std::function<double(double, double, double)> sigma,
                          std::function<double(double, double, double, double, double)> f,
                          std::function<double(double)> phi, std::function<double(double, double)> h) {
  ControlModel model;
  model.name = std::move(name);
  model.horizon = horizon;
  model.controls = std::move(controls);
  model.drift = [b](double r, std::span<const double> x, std::span<const double> u, std::span<double> out) {
    out[0] = b(r, x[0], u[0]);
  };
  model.diffusion = [sigma](double r, std::span<const double> x, std::span<const double> u, std::span<double> out) {
    out[0] = sigma(r, x[0], u[0]);
  };
  model.driver = [f](double r, std::span<const double> x, double y, std::span<const double> z,
                     std::span<const double> u) { return f(r, x[0], y, z[0], u[0]); };
  model.terminal = [phi](std::span<const double> x) { return phi(x[0]); };
  model.obstacle = [h](double r, std::span<const double> x) { return h(r, x[0]); };
  return model;
}

void check_params(const ModelParams& p) {
  if (!(p.horizon > 0.0) || !std::isfinite(p.horizon))
    throw ConfigError("E_MODEL_HORIZON", "horizon T must be positive and finite");
  if (p.control_grid_points < 2) throw ConfigError("E_CONTROL_SET", "control grid needs at least 2 points");
}

}  // namespace

ControlModel example_classical(const ModelParams& params) {
  check_params(params);
  const double level = std::exp(2.0 * params.horizon);
  auto model = scalar_model(
      "example-classical", params.horizon, ControlSet::interval(0.0, 1.0, params.control_grid_points),
      [](double, double x, double u) { return x + u; }, [](double, double x, double) { return x; },
      [](double, double, double y, double, double u) { return y + u; }, [](double x) { return x; },
      [level](double, double x) { return x * level; });
  model.flags = {false, true, true, false};
  return model;
}

ControlModel example_viscosity(const ModelParams& params) {
  check_params(params);
  auto model = scalar_model(
      "example-viscosity", params.horizon, ControlSet::interval(1.0, 2.0, params.control_grid_points),
      [](double, double x, double u) { return x * u; }, [](double, double x, double) { return x; },
      [](double, double, double y, double, double) { return -std::fabs(y); }, [](double x) { return x; },
      [](double, double x) { return x > 0.0 ? x : 0.0; });
  model.flags = {false, false, false, false};
  return model;
}

ControlModel zero_model(const ModelParams& params) {
  check_params(params);
  auto model = scalar_model(
      "zero", params.horizon, ControlSet::interval(0.0, 1.0, params.control_grid_points),
      [](double, double, double) { return 0.0; }, [](double, double, double) { return 0.0; },
      [](double, double, double, double, double) { return 0.0; }, [](double) { return 0.0; },
      [](double, double) { return 1.0; });
  model.flags = {true, true, true, true};
  return model;
}

ControlModel inert_linear_model(const ModelParams& params) {
  check_params(params);
  auto model = scalar_model(
      "inert-linear", params.horizon, ControlSet::interval(0.0, 1.0, params.control_grid_points),
      [](double, double, double) { return 0.0; }, [](double, double, double) { return 0.0; },
      [](double, double, double y, double, double) { return y; }, [](double) { return 1.0; },
      [](double, double) { return 1e9; });
  model.flags = {false, true, true, true};
  return model;
}

ControlModel random_model(std::uint64_t seed, const ModelParams& params) {
  check_params(params);
  std::uint64_t counter = 0;
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * counter_uniform(seed, 0x52414e44ULL, counter++); };

  const double a1 = draw(-0.5, 0.5), a2 = draw(-0.5, 0.5), a3 = draw(-0.2, 0.2);
  const double s0 = draw(0.2, 0.5), s1 = draw(0.0, 0.2);
  const double c1 = draw(-0.5, 0.5), c2 = draw(-0.3, 0.3), c3 = draw(0.0, 0.5), c4 = draw(0.5, 2.0);
  const double p1 = draw(0.2, 1.0);
  const double ha = draw(0.0, 0.3);
  // Keeps Phi <= h(T, .) while leaving the obstacle within reach of the driver.
  const double hc = p1 + ha + draw(0.05, 0.5);

  auto model = scalar_model(
      "random-" + std::to_string(seed), params.horizon, ControlSet::interval(0.0, 1.0, params.control_grid_points),
      [=](double r, double x, double u) { return a1 * std::sin(x) + a2 * u + a3 * std::cos(r); },
      [=](double, double x, double u) { return s0 + s1 * std::cos(x) * (1.0 - 0.5 * u); },
      [=](double, double, double y, double z, double u) { return c1 * std::tanh(y) + c2 * std::sin(z) + c3 * u + c4; },
      [=](double x) { return p1 * std::sin(x); },
      [=](double r, double x) { return hc + ha * std::cos(x - r); });
  model.flags = {true, true, false, false};
  return model;
}

ControlModel make_model(const std::string& name, const ModelParams& params) {
  if (name == "example-classical") return example_classical(params);
  if (name == "example-viscosity") return example_viscosity(params);
  if (name == "zero") return zero_model(params);
  if (name == "inert-linear") return inert_linear_model(params);
  std::string known;
  for (const auto& n : model_catalog()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("E_CONFIG_UNKNOWN_MODEL", "unknown model '" + name + "' (known: " + known + ")");
}

std::vector<std::string> model_catalog() {
  return {"example-classical", "example-viscosity", "zero", "inert-linear"};
}

}  // namespace rfbsde
