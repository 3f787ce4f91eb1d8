#include "rfbsde/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rfbsde/csv.hpp"
#include "rfbsde/error.hpp"
#include "rfbsde/parallel.hpp"
#include "rfbsde/random.hpp"

namespace rfbsde {

OpenLoopControl OpenLoopControl::constant(std::vector<double> value) {
  OpenLoopControl c;
  c.kind_ = Kind::constant;
  c.dim_ = static_cast<int>(value.size());
  c.label_ = "constant(" + csv_row(value) + ")";
  c.constant_ = std::move(value);
  return c;
}

OpenLoopControl OpenLoopControl::of_time(int dim, TimeFn fn, std::string label) {
  OpenLoopControl c;
  c.kind_ = Kind::time;
  c.dim_ = dim;
  c.fn_ = std::move(fn);
  c.label_ = std::move(label);
  return c;
}

OpenLoopControl OpenLoopControl::piecewise(std::vector<double> switch_times, std::vector<std::vector<double>> values) {
  if (values.empty() || values.size() != switch_times.size() + 1)
    throw ConfigError("E_CONTROL_PIECEWISE", "piecewise control needs one more value than switch times");
  const int dim = static_cast<int>(values.front().size());
  std::string label = "piecewise(" + std::to_string(switch_times.size()) + " switches)";
  auto fn = [times = std::move(switch_times), vals = std::move(values)](double t, std::span<double> out) {
    const auto k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    std::copy(vals[k].begin(), vals[k].end(), out.begin());
  };
  return of_time(dim, std::move(fn), std::move(label));
}

OpenLoopControl OpenLoopControl::table(std::size_t paths, std::size_t steps, int dim, std::vector<double> values) {
  if (values.size() != paths * steps * static_cast<std::size_t>(dim))
    throw ConfigError("E_CONTROL_TABLE", "control table size does not match paths x steps x dim");
  OpenLoopControl c;
  c.kind_ = Kind::table;
  c.dim_ = dim;
  c.paths_ = paths;
  c.steps_ = steps;
  c.table_ = std::move(values);
  c.label_ = "table";
  return c;
}

void OpenLoopControl::value(std::size_t path, std::size_t node, double t, std::span<double> out) const {
  switch (kind_) {
    case Kind::constant:
      std::copy(constant_.begin(), constant_.end(), out.begin());
      return;
    case Kind::time:
      fn_(t, out);
      return;
    case Kind::table: {
      const auto m = static_cast<std::size_t>(dim_);
      const auto* src = table_.data() + (node * paths_ + path) * m;
      std::copy(src, src + m, out.begin());
      return;
    }
  }
}

void OpenLoopControl::check(const ControlSet& controls, const TimeGrid& grid, std::size_t paths) const {
  if (dim_ != controls.dim()) throw ConfigError("E_CONTROL_DIM", "control dimension does not match the model");
  std::vector<double> u(static_cast<std::size_t>(dim_));
  auto reject = [&](std::size_t path, std::size_t node) {
    throw ConfigError("E_CONTROL_OUTSIDE_U", "control '" + label_ + "' leaves U at path " + std::to_string(path) +
                                                 ", node " + std::to_string(node));
  };
  if (kind_ == Kind::table) {
    if (paths_ != paths || steps_ != grid.steps)
      throw ConfigError("E_CONTROL_TABLE", "control table shape does not match the simulation grid");
    for (std::size_t i = 0; i < steps_; ++i)
      for (std::size_t m = 0; m < paths_; ++m) {
        value(m, i, grid.node(i), u);
        if (!controls.contains(u)) reject(m, i);
      }
    return;
  }
  for (std::size_t i = 0; i < grid.steps; ++i) {
    value(0, i, grid.node(i), u);
    if (!controls.contains(u)) reject(0, i);
  }
}

std::span<const double> PathEnsemble::control(std::size_t path, std::size_t node) const {
  const auto m = static_cast<std::size_t>(control_dim);
  const std::size_t offset = shared_controls ? node * m : (node * paths + path) * m;
  return std::span<const double>(controls).subspan(offset, m);
}

namespace {

PathEnsemble allocate(const ControlModel& model, const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                      bool shared_controls) {
  PathEnsemble e;
  e.grid = grid;
  e.paths = paths;
  e.state_dim = model.state_dim;
  e.noise_dim = model.noise_dim;
  e.control_dim = model.control_dim();
  e.seed = seed;
  const auto n = static_cast<std::size_t>(e.state_dim);
  const auto d = static_cast<std::size_t>(e.noise_dim);
  const auto m = static_cast<std::size_t>(e.control_dim);
  e.states.assign((grid.steps + 1) * paths * n, 0.0);
  e.increments.assign(grid.steps * paths * d, 0.0);
  e.shared_controls = shared_controls;
  e.controls.assign(shared_controls ? grid.steps * m : grid.steps * paths * m, 0.0);
  return e;
}

void check_inputs(const ControlModel& model, double t, std::span<const double> x, const TimeGrid& grid,
                  std::size_t paths) {
  model.check();
  grid.check();
  if (t != grid.t0) throw ConfigError("E_SIM_START", "simulation must start at the grid's first node");
  if (grid.t1 > model.horizon * (1.0 + 1e-12))
    throw ConfigError("E_SIM_HORIZON", "simulation grid extends beyond the model horizon");
  if (x.size() != static_cast<std::size_t>(model.state_dim))
    throw ConfigError("E_SIM_STATE_DIM", "initial state dimension does not match the model");
  if (paths == 0) throw ConfigError("E_SIM_PATHS", "need at least one path");
}

// Shared Euler-Maruyama loop; control_at fills u for (path, node, r, X_i).
template <typename ControlAt>
void euler_maruyama(const ControlModel& model, PathEnsemble& e, std::span<const double> x0, int workers,
                    ControlAt&& control_at) {
  const auto n = static_cast<std::size_t>(e.state_dim);
  const auto d = static_cast<std::size_t>(e.noise_dim);
  const auto m = static_cast<std::size_t>(e.control_dim);
  const std::size_t N = e.grid.steps;
  const std::size_t M = e.paths;
  const double dt = e.grid.dt();
  const double sqdt = std::sqrt(dt);

  parallel_for(M, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> x(n), u(m), drift(n), diff(n * d), dB(d);
    for (std::size_t p = begin; p < end; ++p) {
      std::copy(x0.begin(), x0.end(), x.begin());
      std::copy(x.begin(), x.end(), e.states.begin() + static_cast<std::ptrdiff_t>(p * n));
      for (std::size_t i = 0; i < N; ++i) {
        const double r = e.grid.node(i);
        control_at(p, i, r, std::span<const double>(x), std::span<double>(u));
        model.drift(r, x, u, drift);
        model.diffusion(r, x, u, diff);
        for (std::size_t k = 0; k < d; ++k) {
          dB[k] = sqdt * counter_normal(e.seed, p, i * d + k);
          e.increments[(i * M + p) * d + k] = dB[k];
        }
        for (std::size_t a = 0; a < n; ++a) {
          double dx = drift[a] * dt;
          for (std::size_t k = 0; k < d; ++k) dx += diff[a * d + k] * dB[k];
          x[a] += dx;
          if (!std::isfinite(x[a]))
            throw NumericalError("E_SIM_NONFINITE", "non-finite state on path " + std::to_string(p) + " at node " +
                                                        std::to_string(i + 1));
        }
        std::copy(x.begin(), x.end(), e.states.begin() + static_cast<std::ptrdiff_t>(((i + 1) * M + p) * n));
      }
    }
  });
}

}  // namespace

PathEnsemble simulate_paths(const ControlModel& model, double t, std::span<const double> x,
                            const OpenLoopControl& control, const TimeGrid& grid, std::size_t paths,
                            std::uint64_t seed, int workers) {
  check_inputs(model, t, x, grid, paths);
  control.check(model.controls, grid, paths);
  const bool shared = control.deterministic();
  PathEnsemble e = allocate(model, grid, paths, seed, shared);
  const auto m = static_cast<std::size_t>(e.control_dim);
  if (shared) {
    for (std::size_t i = 0; i < grid.steps; ++i)
      control.value(0, i, grid.node(i), std::span<double>(e.controls).subspan(i * m, m));
  } else {
    for (std::size_t i = 0; i < grid.steps; ++i)
      for (std::size_t p = 0; p < paths; ++p)
        control.value(p, i, grid.node(i), std::span<double>(e.controls).subspan((i * paths + p) * m, m));
  }
  euler_maruyama(model, e, x, workers,
                 [&](std::size_t p, std::size_t i, double, std::span<const double>, std::span<double> u) {
                   auto src = e.control(p, i);
                   std::copy(src.begin(), src.end(), u.begin());
                 });
  return e;
}

PathEnsemble simulate_closed_loop(const ControlModel& model, const FeedbackLaw& law, double t,
                                  std::span<const double> x, const TimeGrid& grid, std::size_t paths,
                                  std::uint64_t seed, int workers) {
  check_inputs(model, t, x, grid, paths);
  if (model.state_dim != 1) throw ConfigError("E_LAW_STATE_DIM", "feedback laws are tabulated for scalar states");
  if (law.control_dim() != model.control_dim())
    throw ConfigError("E_CONTROL_DIM", "law control dimension does not match the model");
  PathEnsemble e = allocate(model, grid, paths, seed, false);
  const auto m = static_cast<std::size_t>(e.control_dim);
  euler_maruyama(model, e, x, workers,
                 [&](std::size_t p, std::size_t i, double r, std::span<const double> xs, std::span<double> u) {
                   law.evaluate(r, xs[0], u);
                   std::copy(u.begin(), u.end(), e.controls.begin() + static_cast<std::ptrdiff_t>((i * paths + p) * m));
                 });
  return e;
}

MomentReport moment_check(const PathEnsemble& e, int k) {
  if (k != 2 && k != 4) throw ConfigError("E_MOMENT_ORDER", "moment order must be 2 or 4");
  const auto n = static_cast<std::size_t>(e.state_dim);
  auto norm = [&](std::size_t p, std::size_t i) {
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) s += e.state(p, i, static_cast<int>(a)) * e.state(p, i, static_cast<int>(a));
    return std::sqrt(s);
  };
  MomentReport r;
  r.k = k;
  double acc = 0.0;
  for (std::size_t p = 0; p < e.paths; ++p) {
    double sup = 0.0;
    for (std::size_t i = 0; i <= e.grid.steps; ++i) sup = std::max(sup, norm(p, i));
    acc += std::pow(sup, k);
  }
  r.sup_moment = acc / static_cast<double>(e.paths);
  r.initial_norm = norm(0, 0);
  r.ratio = r.sup_moment / (1.0 + std::pow(r.initial_norm, k));
  return r;
}

OpenLoopControl recorded_control(const PathEnsemble& e) {
  const auto m = static_cast<std::size_t>(e.control_dim);
  if (!e.shared_controls) return OpenLoopControl::table(e.paths, e.grid.steps, e.control_dim, e.controls);
  std::vector<double> values(e.grid.steps * e.paths * m);
  for (std::size_t i = 0; i < e.grid.steps; ++i)
    for (std::size_t p = 0; p < e.paths; ++p)
      std::copy_n(e.controls.begin() + static_cast<std::ptrdiff_t>(i * m), m,
                  values.begin() + static_cast<std::ptrdiff_t>((i * e.paths + p) * m));
  return OpenLoopControl::table(e.paths, e.grid.steps, e.control_dim, std::move(values));
}

void write_ensemble_csv(std::ostream& out, const PathEnsemble& e) {
  out << "# ensemble t0=" << fmt_double(e.grid.t0) << " t1=" << fmt_double(e.grid.t1) << " steps=" << e.grid.steps
      << " paths=" << e.paths << " seed=" << e.seed << "\n";
  out << "path,node,time";
  for (int a = 0; a < e.state_dim; ++a) out << ",x" << a;
  for (int a = 0; a < e.control_dim; ++a) out << ",u" << a;
  out << "\n";
  for (std::size_t p = 0; p < e.paths; ++p) {
    for (std::size_t i = 0; i <= e.grid.steps; ++i) {
      out << p << ',' << i << ',' << fmt_double(e.grid.node(i));
      for (int a = 0; a < e.state_dim; ++a) out << ',' << fmt_double(e.state(p, i, a));
      for (int a = 0; a < e.control_dim; ++a) {
        out << ',';
        if (i < e.grid.steps) out << fmt_double(e.control(p, i)[static_cast<std::size_t>(a)]);
      }
      out << "\n";
    }
  }
}

}  // namespace rfbsde
