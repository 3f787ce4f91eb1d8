#include "rfbsde/rbsde.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "rfbsde/csv.hpp"
#include "rfbsde/error.hpp"
#include "rfbsde/parallel.hpp"

namespace rfbsde {

void SolverConfig::check() const {
  if (degree < 1) throw ConfigError("E_SOLVER_DEGREE", "regression degree must be >= 1");
  if (bins < 1) throw ConfigError("E_SOLVER_BINS", "bin count must be >= 1");
  if (!(penalty > 0.0)) throw ConfigError("E_SOLVER_PENALTY", "penalty level must be positive");
  if (picard_iterations < 1) throw ConfigError("E_SOLVER_PICARD", "need at least one Picard iteration");
  if (!(tol_obstacle >= 0.0) || !(tol_skorokhod >= 0.0) || !(picard_tol > 0.0))
    throw ConfigError("E_SOLVER_TOL", "solver tolerances must be nonnegative");
  if (bootstrap_resamples < 2) throw ConfigError("E_SOLVER_BOOTSTRAP", "need at least 2 bootstrap resamples");
}

namespace {

enum class Scheme { penalized, reflected };

RbsdeSolution backward(const ControlModel& model, const PathEnsemble& e, const SolverConfig& config, Scheme scheme,
                       double penalty) {
  model.check();
  config.check();
  if (e.state_dim != model.state_dim || e.noise_dim != model.noise_dim || e.control_dim != model.control_dim())
    throw ConfigError("E_SOLVER_DIMS", "ensemble dimensions do not match the model");

  const std::size_t M = e.paths;
  const std::size_t N = e.grid.steps;
  const auto d = static_cast<std::size_t>(e.noise_dim);
  const double dt = e.grid.dt();
  const double pen_dt = penalty * dt;

  RbsdeSolution sol;
  sol.paths = M;
  sol.steps = N;
  sol.noise_dim = e.noise_dim;
  sol.Y.assign((N + 1) * M, 0.0);
  sol.Z.assign(N * M * d, 0.0);
  sol.K.assign((N + 1) * M, 0.0);
  sol.pathwise.assign(M, 0.0);
  std::vector<double> dK(N * M, 0.0);
  std::vector<double> slack(M, 0.0);
  std::vector<std::size_t> picard_misses(M, 0);
  std::vector<double> picard_worst(M, 0.0);

  for (std::size_t p = 0; p < M; ++p) {
    const double phi = model.terminal(e.state_vec(p, N));
    sol.Y[N * M + p] = phi;
    sol.pathwise[p] = phi;
  }

  std::vector<double> cont(M), target(M), zk(M);
  for (std::size_t ii = N; ii-- > 0;) {
    const std::size_t i = ii;
    const double r = e.grid.node(i);
    const ConditionalExpectation ce(e.node_states(i), M, e.state_dim, config);
    if (ce.used_fallback()) {
      sol.diagnostics.regression_fallback = true;
      ++sol.diagnostics.fallback_steps;
    }
    const std::span<const double> next(sol.Y.data() + (i + 1) * M, M);
    ce.project(next, cont);
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t p = 0; p < M; ++p) target[p] = next[p] * e.increment(p, i, static_cast<int>(k));
      ce.project(target, zk);
      for (std::size_t p = 0; p < M; ++p) sol.Z[(i * M + p) * d + k] = zk[p] / dt;
    }

    parallel_for(M, config.workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t p = begin; p < end; ++p) {
        const auto x = e.state_vec(p, i);
        const auto u = e.control(p, i);
        const std::span<const double> z(sol.Z.data() + (i * M + p) * d, d);
        const double h = model.obstacle(r, x);
        const double c = cont[p];
        double y = c;
        double fval = 0.0;
        double pen = 0.0;
        double change = 0.0;
        for (int it = 0; it < config.picard_iterations; ++it) {
          fval = model.driver(r, x, y, z, u);
          double next_y = c + fval * dt;
          pen = 0.0;
          if (scheme == Scheme::penalized && next_y > h) {
            // y = a - n dt (y - h)^+ solved exactly for the frozen driver value.
            next_y = (next_y + pen_dt * h) / (1.0 + pen_dt);
            pen = penalty * (next_y - h);
          }
          change = std::fabs(next_y - y);
          y = next_y;
          if (!std::isfinite(y))
            throw NumericalError("E_RBSDE_NONFINITE", "non-finite Y at step " + std::to_string(i));
          if (it > 0 && change <= config.picard_tol * (1.0 + std::fabs(y))) break;
        }
        if (config.picard_iterations > 1 && change > config.picard_tol * (1.0 + std::fabs(y))) {
          ++picard_misses[p];
          picard_worst[p] = std::max(picard_worst[p], change);
        }
        double dk = 0.0;
        if (scheme == Scheme::reflected && y > h) {
          dk = y - h;
          y = h;
        }
        sol.Y[i * M + p] = y;
        dK[i * M + p] = dk;
        slack[p] += (h - y) * dk;
        sol.pathwise[p] += fval * dt - dk - pen * dt;
      }
    });
  }

  // K is cumulative forward in time: K_0 = 0, K_{i+1} = K_i + dK_i.
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t p = 0; p < M; ++p) sol.K[(i + 1) * M + p] = sol.K[i * M + p] + dK[i * M + p];

  auto& diag = sol.diagnostics;
  for (std::size_t i = 0; i <= N; ++i) {
    const double r = e.grid.node(i);
    for (std::size_t p = 0; p < M; ++p) {
      const double viol = sol.Y[i * M + p] - model.obstacle(r, e.state_vec(p, i));
      diag.max_obstacle_violation = std::max(diag.max_obstacle_violation, viol);
      if (i < N) {
        diag.max_negative_dk = std::max(diag.max_negative_dk, -dK[i * M + p]);
        if (dK[i * M + p] > 0.0) ++diag.reflected_nodes;
      }
    }
  }
  for (std::size_t p = 0; p < M; ++p) {
    diag.picard_unconverged += picard_misses[p];
    diag.max_picard_update = std::max(diag.max_picard_update, picard_worst[p]);
    diag.max_skorokhod_slack = std::max(diag.max_skorokhod_slack, std::fabs(slack[p]));
    diag.terminal_mismatch =
        std::max(diag.terminal_mismatch, std::fabs(sol.Y[N * M + p] - model.terminal(e.state_vec(p, N))));
  }
  return sol;
}

}  // namespace

RbsdeSolution solve_penalized(const ControlModel& model, const PathEnsemble& ensemble, double penalty,
                              const SolverConfig& config) {
  if (!(penalty > 0.0)) throw ConfigError("E_SOLVER_PENALTY", "penalty level must be positive");
  return backward(model, ensemble, config, Scheme::penalized, penalty);
}

RbsdeSolution solve_reflected(const ControlModel& model, const PathEnsemble& ensemble, const SolverConfig& config) {
  return backward(model, ensemble, config, Scheme::reflected, 1.0);
}

double bootstrap_standard_error(std::span<const double> samples, int resamples, std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (n < 2) return 0.0;
  std::mt19937_64 gen(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& mean : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto idx = static_cast<std::size_t>((static_cast<unsigned __int128>(gen()) * n) >> 64);
      s += samples[idx];
    }
    mean = s / static_cast<double>(n);
  }
  double avg = 0.0;
  for (double v : means) avg += v;
  avg /= static_cast<double>(means.size());
  double var = 0.0;
  for (double v : means) var += (v - avg) * (v - avg);
  return std::sqrt(var / static_cast<double>(means.size() - 1));
}

CostEstimate summarize(const RbsdeSolution& solution, const SolverConfig& config) {
  CostEstimate c;
  c.value = solution.value();
  double s = 0.0;
  for (double v : solution.pathwise) s += v;
  c.pathwise_mean = solution.pathwise.empty() ? 0.0 : s / static_cast<double>(solution.pathwise.size());
  c.standard_error = bootstrap_standard_error(solution.pathwise, config.bootstrap_resamples, config.bootstrap_seed);
  c.diagnostics = solution.diagnostics;
  return c;
}

CostEstimate cost_functional(const ControlModel& model, double t, std::span<const double> x,
                             const OpenLoopControl& control, const TimeGrid& grid, std::size_t paths,
                             std::uint64_t seed, const SolverConfig& config) {
  const auto ensemble = simulate_paths(model, t, x, control, grid, paths, seed, config.workers);
  return summarize(solve_reflected(model, ensemble, config), config);
}

void write_solution_csv(std::ostream& out, const RbsdeSolution& s) {
  out << "path,node,Y";
  for (int k = 0; k < s.noise_dim; ++k) out << ",Z" << k;
  out << ",K\n";
  for (std::size_t p = 0; p < s.paths; ++p) {
    for (std::size_t i = 0; i <= s.steps; ++i) {
      out << p << ',' << i << ',' << fmt_double(s.y(p, i));
      for (int k = 0; k < s.noise_dim; ++k) {
        out << ',';
        if (i < s.steps) out << fmt_double(s.z(p, i, k));
      }
      out << ',' << fmt_double(s.k(p, i)) << "\n";
    }
  }
  const auto& d = s.diagnostics;
  out << "# max_obstacle_violation=" << fmt_double(d.max_obstacle_violation) << "\n";
  out << "# max_skorokhod_slack=" << fmt_double(d.max_skorokhod_slack) << "\n";
  out << "# terminal_mismatch=" << fmt_double(d.terminal_mismatch) << "\n";
  out << "# reflected_nodes=" << d.reflected_nodes << "\n";
  out << "# picard_unconverged=" << d.picard_unconverged << "\n";
  out << "# regression_fallback=" << (d.regression_fallback ? "true" : "false") << "\n";
}

}  // namespace rfbsde
