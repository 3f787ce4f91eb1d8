#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "rfbsde/model.hpp"
#include "rfbsde/simulate.hpp"

namespace rfbsde {

enum class EstimatorKind { regression, binning };

struct SolverConfig {
  EstimatorKind estimator = EstimatorKind::regression;
  int degree = 3;  // total polynomial degree of the regression basis
  int bins = 32;   // equal-mass bins for the binning estimator / fallback
  double penalty = 100.0;
  double tol_obstacle = 0.0;
  double tol_skorokhod = 1e-8;
  int picard_iterations = 3;
  /// Early exit once an update moves y by at most picard_tol (1 + |y|).
  double picard_tol = 1e-4;
  int bootstrap_resamples = 200;
  std::uint64_t bootstrap_seed = 7;
  int workers = 1;

  void check() const;
};

struct RbsdeDiagnostics {
  double max_obstacle_violation = 0.0;  // max (Y - h)^+
  double max_skorokhod_slack = 0.0;     // max over paths of |sum (h - Y) dK|
  double max_negative_dk = 0.0;         // max (-dK)^+, zero by construction
  double terminal_mismatch = 0.0;       // max |Y_N - Phi(X_N)|
  bool regression_fallback = false;     // a singular regression switched to binning
  std::size_t fallback_steps = 0;
  std::size_t reflected_nodes = 0;
  /// Nodes whose last Picard update still exceeded picard_tol, and the largest such update.
  std::size_t picard_unconverged = 0;
  double max_picard_update = 0.0;
};

/// Discrete (Y, Z, K) on a path ensemble, node-major like PathEnsemble.
struct RbsdeSolution {
  std::size_t paths = 0;
  std::size_t steps = 0;
  int noise_dim = 1;
  std::vector<double> Y;  // (N+1) x M
  std::vector<double> Z;  // N x M x d (Z at node N is not defined)
  std::vector<double> K;  // (N+1) x M, cumulative, K[.][0] = 0
  /// Per-path sum Phi(X_N) + sum_i (f_i dt - dK_i): an unbiased-in-expectation
  /// sample of the node-0 value used for the standard error.
  std::vector<double> pathwise;
  RbsdeDiagnostics diagnostics;

  double y(std::size_t path, std::size_t node) const { return Y[node * paths + path]; }
  double z(std::size_t path, std::size_t node, int k = 0) const {
    return Z[(node * paths + path) * static_cast<std::size_t>(noise_dim) + static_cast<std::size_t>(k)];
  }
  double k(std::size_t path, std::size_t node) const { return K[node * paths + path]; }
  /// Node-0 value (deterministic because all paths share X(t) = x).
  double value() const { return Y.empty() ? 0.0 : Y[0]; }
};

/// Least-squares projection onto a polynomial basis in the (standardized)
/// state, with an equal-mass binning fallback. Fitted once per node and then
/// applied to several targets.
class ConditionalExpectation {
 public:
  ConditionalExpectation(std::span<const double> states, std::size_t paths, int state_dim, const SolverConfig& config);

  void project(std::span<const double> target, std::span<double> out) const;
  bool used_fallback() const { return fallback_; }
  bool constant() const { return mode_ == Mode::mean; }

 private:
  enum class Mode { mean, regression, binning };
  void setup_binning(std::span<const double> states, int state_dim, int bins);

  Mode mode_ = Mode::mean;
  bool fallback_ = false;
  std::size_t paths_;
  std::size_t basis_size_ = 1;
  std::vector<double> basis_;  // paths x basis_size, row-major
  std::vector<double> gram_inverse_;
  std::vector<std::size_t> bin_of_;
  std::size_t bin_count_ = 0;
};

RbsdeSolution solve_penalized(const ControlModel& model, const PathEnsemble& ensemble, double penalty,
                              const SolverConfig& config);

RbsdeSolution solve_reflected(const ControlModel& model, const PathEnsemble& ensemble, const SolverConfig& config);

struct CostEstimate {
  double value = 0.0;          // scheme value Y(t)
  double standard_error = 0.0;  // bootstrap SE of the pathwise mean
  double pathwise_mean = 0.0;
  RbsdeDiagnostics diagnostics;
};

/// Bootstrap standard error of the mean of samples.
double bootstrap_standard_error(std::span<const double> samples, int resamples, std::uint64_t seed);

CostEstimate summarize(const RbsdeSolution& solution, const SolverConfig& config);

/// J(t, x; u) = Y^{t,x;u}(t) via simulate_paths + solve_reflected.
CostEstimate cost_functional(const ControlModel& model, double t, std::span<const double> x,
                             const OpenLoopControl& control, const TimeGrid& grid, std::size_t paths,
                             std::uint64_t seed, const SolverConfig& config);

/// How the tree discretizes one step.
enum class TreeScheme {
  /// Second-order weak moments and trapezoidal driver integration.
  second_order,
  /// Euler-Maruyama moments and the same implicit driver step as the Monte
  /// Carlo solvers, so the tree is the exact expectation of their discrete scheme.
  mc_consistent,
};

using StateFeedback = std::function<double(double t, double x)>;

/// Binary-tree evaluation of the reflected BSDE for scalar models: per-step
/// two-moment matching, exact backward expectations, projection onto h.
double tree_oracle(const ControlModel& model, double t, double x, const StateFeedback& control, int depth,
                   TreeScheme scheme = TreeScheme::second_order);

void write_solution_csv(std::ostream& out, const RbsdeSolution& solution);

}  // namespace rfbsde
