#include "rfbsde/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Sparse>

#include "rfbsde/csv.hpp"
#include "rfbsde/error.hpp"
#include "rfbsde/parallel.hpp"

namespace rfbsde {

double hamiltonian(const ControlModel& model, const HamiltonianQuery& q) {
  const auto n = static_cast<std::size_t>(model.state_dim);
  const auto d = static_cast<std::size_t>(model.noise_dim);
  if (q.x.size() != n || q.p.size() != n || q.P.size() != n * n ||
      q.u.size() != static_cast<std::size_t>(model.control_dim()))
    throw ConfigError("E_HAMILTONIAN_DIMS", "Hamiltonian query dimensions do not match the model");
  std::vector<double> b(n), s(n * d), z(d, 0.0);
  model.drift(q.r, q.x, q.u, b);
  model.diffusion(q.r, q.x, q.u, s);
  for (double v : b)
    if (!std::isfinite(v)) throw NumericalError("E_HAMILTONIAN_NONFINITE", "drift b is not finite");
  for (double v : s)
    if (!std::isfinite(v)) throw NumericalError("E_HAMILTONIAN_NONFINITE", "diffusion sigma is not finite");
  double trace = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < n; ++c) {
      double ssT = 0.0;
      for (std::size_t k = 0; k < d; ++k) ssT += s[a * d + k] * s[c * d + k];
      trace += 0.5 * ssT * q.P[c * n + a];
    }
  double pb = 0.0;
  for (std::size_t a = 0; a < n; ++a) pb += q.p[a] * b[a];
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t a = 0; a < n; ++a) z[k] += q.p[a] * s[a * d + k];
  const double f = model.driver(q.r, q.x, q.y, z, q.u);
  if (!std::isfinite(f)) throw NumericalError("E_HAMILTONIAN_NONFINITE", "driver f is not finite");
  return trace + pb + f;
}

double hamiltonian(const ControlModel& model, double r, double x, double y, double p, double P, double u) {
  const double b = model.b(r, x, u);
  const double s = model.sigma(r, x, u);
  const double f = model.f(r, x, y, p * s, u);
  if (!std::isfinite(b)) throw NumericalError("E_HAMILTONIAN_NONFINITE", "drift b is not finite");
  if (!std::isfinite(s)) throw NumericalError("E_HAMILTONIAN_NONFINITE", "diffusion sigma is not finite");
  if (!std::isfinite(f)) throw NumericalError("E_HAMILTONIAN_NONFINITE", "driver f is not finite");
  return 0.5 * s * s * P + p * b + f;
}

namespace {

InfHamiltonian select(const std::vector<double>& values, const ControlSet& controls) {
  InfHamiltonian out;
  out.value = *std::min_element(values.begin(), values.end());
  const double tie = 1e-12 * (1.0 + std::fabs(out.value));
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] <= out.value + tie) out.argmin.push_back(k);
  const auto c = controls.grid_point(out.argmin.front());
  out.canonical.assign(c.begin(), c.end());
  return out;
}

}  // namespace

InfHamiltonian inf_hamiltonian(const ControlModel& model, double r, std::span<const double> x, double y,
                               std::span<const double> p, std::span<const double> P) {
  const std::size_t K = model.controls.grid_size();
  if (K == 0) throw ConfigError("E_CONTROL_SET", "control grid is empty");
  HamiltonianQuery q{r, {x.begin(), x.end()}, y, {p.begin(), p.end()}, {P.begin(), P.end()}, {}};
  std::vector<double> values(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto u = model.controls.grid_point(k);
    q.u.assign(u.begin(), u.end());
    values[k] = hamiltonian(model, q);
  }
  return select(values, model.controls);
}

InfHamiltonian inf_hamiltonian(const ControlModel& model, double r, double x, double y, double p, double P) {
  const std::size_t K = model.controls.grid_size();
  if (K == 0) throw ConfigError("E_CONTROL_SET", "control grid is empty");
  std::vector<double> values(K);
  for (std::size_t k = 0; k < K; ++k) values[k] = hamiltonian(model, r, x, y, p, P, model.controls.grid_point(k)[0]);
  return select(values, model.controls);
}

std::string to_string(HjbScheme s) { return s == HjbScheme::explicit_euler ? "explicit" : "policy-iteration"; }

std::string to_string(BoundaryRule b) {
  switch (b) {
    case BoundaryRule::quadratic_extrapolation: return "quadratic-extrapolation";
    case BoundaryRule::linear_extrapolation: return "linear-extrapolation";
    case BoundaryRule::one_sided_pde: return "one-sided-pde";
  }
  return "?";
}

double explicit_dt_limit(const ControlModel& model, const SpaceTimeGrid& grid, double cfl) {
  grid.check();
  const std::size_t stride = std::max<std::size_t>(1, grid.rows() / 64);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < grid.rows(); i += stride) rows.push_back(i);
  if (rows.back() != grid.rows() - 1) rows.push_back(grid.rows() - 1);
  double smax = 0.0;
  for (std::size_t i : rows)
    for (std::size_t j = 0; j < grid.cols(); ++j)
      for (std::size_t k = 0; k < model.controls.grid_size(); ++k) {
        const double s = model.sigma(grid.t(i), grid.x(j), model.controls.grid_point(k)[0]);
        smax = std::max(smax, s * s);
      }
  if (smax == 0.0) return std::numeric_limits<double>::infinity();
  return cfl * grid.dx() * grid.dx() / smax;
}

namespace {

void fill_boundary(std::vector<double>& w, BoundaryRule rule) {
  const std::size_t n = w.size() - 1;
  if (rule == BoundaryRule::linear_extrapolation || n < 3) {
    w[0] = 2.0 * w[1] - w[2];
    w[n] = 2.0 * w[n - 1] - w[n - 2];
  } else {
    w[0] = 3.0 * w[1] - 3.0 * w[2] + w[3];
    w[n] = 3.0 * w[n - 1] - 3.0 * w[n - 2] + w[n - 3];
  }
}

// Applies the obstacle: projection, or the implicit penalty term when penalty > 0.
void constrain(const ControlModel& model, double r, const SpaceTimeGrid& g, double step, double penalty,
               std::vector<double>& w) {
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double h = model.h(r, g.x(j));
    if (w[j] <= h) continue;
    if (penalty > 0.0) {
      const double a = penalty * step;
      w[j] = (w[j] + a * h) / (1.0 + a);
    } else {
      w[j] = h;
    }
  }
}

void check_finite(const std::vector<double>& w, std::size_t i) {
  for (double v : w)
    if (!std::isfinite(v)) throw NumericalError("E_HJB_NONFINITE", "non-finite value at time index " + std::to_string(i));
}

void explicit_step(const ControlModel& model, const SpaceTimeGrid& g, double r, double step, const HjbConfig& cfg,
                   const std::vector<double>& w, std::vector<double>& out) {
  const std::size_t n = g.space_steps;
  const double dx = g.dx();
  const std::size_t K = model.controls.grid_size();
  auto update = [&](std::size_t j, double p, double P) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k)
      best = std::min(best, hamiltonian(model, r, g.x(j), w[j], p, P, model.controls.grid_point(k)[0]));
    return w[j] + step * best;
  };
  parallel_for(n - 1, cfg.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t jj = begin; jj < end; ++jj) {
      const std::size_t j = jj + 1;
      const double p = (w[j + 1] - w[j - 1]) / (2.0 * dx);
      const double P = (w[j + 1] - 2.0 * w[j] + w[j - 1]) / (dx * dx);
      out[j] = update(j, p, P);
    }
  });
  if (cfg.boundary == BoundaryRule::one_sided_pde && n >= 3) {
    const double dx2 = dx * dx;
    out[0] = update(0, (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dx),
                    (2.0 * w[0] - 5.0 * w[1] + 4.0 * w[2] - w[3]) / dx2);
    out[n] = update(n, (3.0 * w[n] - 4.0 * w[n - 1] + w[n - 2]) / (2.0 * dx),
                    (2.0 * w[n] - 5.0 * w[n - 1] + 4.0 * w[n - 2] - w[n - 3]) / dx2);
  } else {
    fill_boundary(out, cfg.boundary);
  }
}

// One implicit step by Howard iteration; the driver is frozen at the previous iterate.
void implicit_step(const ControlModel& model, const SpaceTimeGrid& g, double r, double step, const HjbConfig& cfg,
                   const std::vector<double>& next, std::vector<double>& w, std::size_t time_index) {
  const std::size_t n = g.space_steps;
  const auto J = static_cast<Eigen::Index>(n + 1);
  const double dx = g.dx();
  const std::size_t K = model.controls.grid_size();
  w = next;
  std::vector<std::size_t> policy(n + 1, 0);
  for (int it = 0; it < cfg.policy_max_iterations; ++it) {
    for (std::size_t j = 1; j < n; ++j) {
      const double p = (w[j + 1] - w[j - 1]) / (2.0 * dx);
      const double P = (w[j + 1] - 2.0 * w[j] + w[j - 1]) / (dx * dx);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        const double v = hamiltonian(model, r, g.x(j), w[j], p, P, model.controls.grid_point(k)[0]);
        if (v < best - 1e-12 * (1.0 + std::fabs(best))) {
          best = v;
          policy[j] = k;
        }
      }
    }
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs(J);
    for (std::size_t j = 1; j < n; ++j) {
      const double u = model.controls.grid_point(policy[j])[0];
      const double x = g.x(j);
      const double b = model.b(r, x, u), s = model.sigma(r, x, u);
      const double p = (w[j + 1] - w[j - 1]) / (2.0 * dx);
      const double diff = 0.5 * s * s / (dx * dx), adv = b / (2.0 * dx);
      const auto row = static_cast<Eigen::Index>(j);
      trips.emplace_back(row, row - 1, -step * (diff - adv));
      trips.emplace_back(row, row, 1.0 + 2.0 * step * diff);
      trips.emplace_back(row, row + 1, -step * (diff + adv));
      rhs[row] = next[j] + step * model.f(r, x, w[j], p * s, u);
    }
    const bool linear = cfg.boundary == BoundaryRule::linear_extrapolation || n < 3;
    const auto last = static_cast<Eigen::Index>(n);
    if (linear) {
      trips.emplace_back(0, 0, 1.0), trips.emplace_back(0, 1, -2.0), trips.emplace_back(0, 2, 1.0);
      trips.emplace_back(last, last, 1.0), trips.emplace_back(last, last - 1, -2.0),
          trips.emplace_back(last, last - 2, 1.0);
    } else {
      trips.emplace_back(0, 0, 1.0), trips.emplace_back(0, 1, -3.0), trips.emplace_back(0, 2, 3.0),
          trips.emplace_back(0, 3, -1.0);
      trips.emplace_back(last, last, 1.0), trips.emplace_back(last, last - 1, -3.0),
          trips.emplace_back(last, last - 2, 3.0), trips.emplace_back(last, last - 3, -1.0);
    }
    rhs[0] = 0.0;
    rhs[last] = 0.0;
    Eigen::SparseMatrix<double> A(J, J);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw NumericalError("E_HJB_SINGULAR", "implicit system is singular at time index " + std::to_string(time_index));
    const Eigen::VectorXd sol = lu.solve(rhs);
    double change = 0.0, scale = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      change = std::max(change, std::fabs(sol[static_cast<Eigen::Index>(j)] - w[j]));
      scale = std::max(scale, std::fabs(sol[static_cast<Eigen::Index>(j)]));
      w[j] = sol[static_cast<Eigen::Index>(j)];
    }
    check_finite(w, time_index);
    if (it > 0 && change <= cfg.policy_tol * (1.0 + scale)) return;
  }
  throw NumericalError("E_HJB_POLICY", "policy iteration did not converge at time index " + std::to_string(time_index));
}

}  // namespace

ValueSurface solve_obstacle_hjb(const ControlModel& model, const SpaceTimeGrid& grid, const HjbConfig& cfg) {
  model.check();
  grid.check();
  if (!model.scalar()) throw ConfigError("E_HJB_DIMS", "the HJB solver handles scalar models only");
  if (grid.t1 > model.horizon + 1e-12) throw ConfigError("E_HJB_GRID", "grid extends beyond the model horizon");
  if (!(cfg.cfl > 0.0)) throw ConfigError("E_HJB_CFL", "cfl bound must be positive");
  if (cfg.penalty < 0.0) throw ConfigError("E_HJB_PENALTY", "penalty must be nonnegative");

  const std::size_t N = grid.time_steps;
  const double dt = grid.dt();
  std::size_t substeps = 1;
  if (cfg.scheme == HjbScheme::explicit_euler) {
    const double limit = explicit_dt_limit(model, grid, cfg.cfl);
    if (cfg.substeps == 0) {
      substeps = std::isfinite(limit) ? static_cast<std::size_t>(std::ceil(dt / limit * (1.0 - 1e-12))) : 1;
      substeps = std::max<std::size_t>(substeps, 1);
    } else {
      substeps = cfg.substeps;
      if (dt / static_cast<double>(substeps) > limit)
        throw ConfigError("E_HJB_CFL", "explicit scheme violates the stability bound: step " +
                                           fmt_double(dt / static_cast<double>(substeps)) + " exceeds required dt <= " +
                                           fmt_double(limit));
    }
  }

  std::vector<double> values(grid.rows() * grid.cols());
  std::vector<double> w(grid.cols()), tmp(grid.cols());
  for (std::size_t j = 0; j < grid.cols(); ++j) w[j] = model.phi(grid.x(j));
  std::copy(w.begin(), w.end(), values.begin() + static_cast<std::ptrdiff_t>(N * grid.cols()));

  for (std::size_t ii = N; ii-- > 0;) {
    const std::size_t i = ii;
    if (cfg.scheme == HjbScheme::explicit_euler) {
      const double step = dt / static_cast<double>(substeps);
      for (std::size_t s = 0; s < substeps; ++s) {
        const double r = grid.t(i + 1) - step * static_cast<double>(s);
        explicit_step(model, grid, r, step, cfg, w, tmp);
        std::swap(w, tmp);
        const double r_new = s + 1 == substeps ? grid.t(i) : r - step;
        constrain(model, r_new, grid, step, cfg.penalty, w);
        check_finite(w, i);
      }
    } else {
      std::vector<double> next = w;
      implicit_step(model, grid, grid.t(i), dt, cfg, next, w, i);
      constrain(model, grid.t(i), grid, dt, cfg.penalty, w);
    }
    std::copy(w.begin(), w.end(), values.begin() + static_cast<std::ptrdiff_t>(i * grid.cols()));
  }

  ValueSurface surface(grid, std::move(values), "computed", cfg.kinks);
  surface.model_name = model.name;
  surface.scheme = to_string(cfg.scheme) + "/" + to_string(cfg.boundary) + (cfg.penalty > 0.0 ? "/penalty" : "");
  surface.substeps = substeps;
  return surface;
}

double ResidualField::max_abs(std::size_t band) const {
  double m = 0.0;
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = band; j + band < grid.cols(); ++j) {
      const double v = values[grid.index(i, j)];
      if (std::isfinite(v)) m = std::max(m, std::fabs(v));
    }
  return m;
}

ResidualField residual(const ValueSurface& surface, const ControlModel& model) {
  const auto& g = surface.grid();
  ResidualField field{g, std::vector<double>(g.rows() * g.cols(), std::numeric_limits<double>::quiet_NaN())};
  for (std::size_t i = 0; i < g.time_steps; ++i) {
    for (std::size_t j = 1; j < g.space_steps; ++j) {
      const double t = g.t(i), x = g.x(j), w = surface.at(i, j);
      double wt, p, P;
      if (surface.is_kink_column(j)) {
        const auto [left, right] = surface.one_sided_slopes(i, j);
        wt = surface.wt(i, j);
        p = 0.5 * (left + right);
        P = 0.0;
      } else {
        const auto d = surface.derivatives(i, j);
        wt = d.wt, p = d.wx, P = d.wxx;
      }
      const double inf = inf_hamiltonian(model, t, x, w, p, P).value;
      field.values[g.index(i, j)] = std::max(w - model.h(t, x), -wt - inf);
    }
  }
  return field;
}

void write_residual_csv(std::ostream& out, const ResidualField& field) {
  const auto& g = field.grid;
  out << "# kind=residual t0=" << fmt_double(g.t0) << " t1=" << fmt_double(g.t1) << " time_steps=" << g.time_steps
      << " x_lo=" << fmt_double(g.x_lo) << " x_hi=" << fmt_double(g.x_hi) << " space_steps=" << g.space_steps << "\n";
  out << "t";
  for (std::size_t j = 0; j < g.cols(); ++j) out << ',' << fmt_double(g.x(j));
  out << "\n";
  for (std::size_t i = 0; i < g.rows(); ++i) {
    out << fmt_double(g.t(i));
    for (std::size_t j = 0; j < g.cols(); ++j) out << ',' << fmt_double(field.values[g.index(i, j)]);
    out << "\n";
  }
}

SurfaceError compare_surfaces(const ValueSurface& surface, const ValueSurface& reference, std::size_t edge_band,
                              double kink_band) {
  const auto& g = surface.grid();
  if (!(g == reference.grid())) throw ConfigError("E_SURFACE_GRID", "compared surfaces use different grids");
  SurfaceError e;
  for (std::size_t j = edge_band; j + edge_band < g.cols(); ++j) {
    const double x = g.x(j);
    bool skip = false;
    for (double k : reference.kinks()) skip = skip || std::fabs(x - k) <= kink_band * (1.0 + 1e-12);
    if (skip) continue;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double ref = reference.at(i, j);
      const double abs = std::fabs(surface.at(i, j) - ref);
      const double rel = ref != 0.0 ? abs / std::fabs(ref) : (abs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      ++e.nodes;
      e.max_absolute = std::max(e.max_absolute, abs);
      if (rel > e.max_relative) {
        e.max_relative = rel;
        e.worst_t = g.t(i);
        e.worst_x = x;
      }
    }
  }
  return e;
}

}  // namespace rfbsde
