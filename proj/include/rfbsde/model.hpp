#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rfbsde {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Compact control set: a product of closed intervals, discretized per
/// coordinate for grid search.
class ControlSet {
 public:
  ControlSet() = default;
  ControlSet(std::vector<Interval> bounds, std::vector<int> grid_points);
  /// Single interval [lo, hi] with `points` grid nodes.
  static ControlSet interval(double lo, double hi, int points);

  int dim() const { return static_cast<int>(bounds_.size()); }
  const std::vector<Interval>& bounds() const { return bounds_; }
  const std::vector<int>& grid_points() const { return grid_points_; }

  /// Flattened grid, lexicographic with the first coordinate most significant;
  /// element 0 is the lexicographically smallest control.
  const std::vector<double>& grid() const { return grid_; }
  std::size_t grid_size() const { return grid_.size() / static_cast<std::size_t>(std::max(1, dim())); }
  std::span<const double> grid_point(std::size_t k) const;

  bool contains(std::span<const double> u, double tol = 1e-12) const;
  void project(std::span<double> u) const;
  /// Largest coordinate width, used by the law regularity heuristic.
  double max_width() const;

 private:
  std::vector<Interval> bounds_;
  std::vector<int> grid_points_;
  std::vector<double> grid_;
};

using DriftFn = std::function<void(double r, std::span<const double> x, std::span<const double> u,
                                   std::span<double> out)>;
/// Writes the n x d diffusion matrix row-major.
using DiffusionFn = std::function<void(double r, std::span<const double> x, std::span<const double> u,
                                       std::span<double> out)>;
using DriverFn = std::function<double(double r, std::span<const double> x, double y,
                                      std::span<const double> z, std::span<const double> u)>;
using TerminalFn = std::function<double(std::span<const double> x)>;
using ObstacleFn = std::function<double(double r, std::span<const double> x)>;

/// Declared (not measured) regularity assumptions A1-A4.
struct AssumptionFlags {
  bool a1 = false;
  bool a2 = false;
  bool a3 = false;
  bool a4 = false;
};

/// A complete problem instance: coefficients, obstacle and control set.
/// Immutable after construction; safe to share between threads.
struct ControlModel {
  std::string name;
  double horizon = 1.0;
  int state_dim = 1;
  int noise_dim = 1;
  ControlSet controls;
  DriftFn drift;
  DiffusionFn diffusion;
  DriverFn driver;
  TerminalFn terminal;
  ObstacleFn obstacle;
  AssumptionFlags flags;

  int control_dim() const { return controls.dim(); }

  // Scalar conveniences for n = d = m = 1 models.
  double b(double r, double x, double u) const;
  double sigma(double r, double x, double u) const;
  double f(double r, double x, double y, double z, double u) const;
  double phi(double x) const;
  double h(double r, double x) const;
  bool scalar() const { return state_dim == 1 && noise_dim == 1 && control_dim() == 1; }

  /// Throws ConfigError when a coefficient is missing or dimensions are invalid.
  void check() const;
};

/// Generator matrix a = sigma sigma^T / 2 at (r, x, u), row-major n x n.
std::vector<double> generator_matrix(const ControlModel& model, double r, std::span<const double> x,
                                     std::span<const double> u);

enum class CheckStatus { pass, fail, unchecked };
std::string to_string(CheckStatus s);

struct AssumptionEntry {
  std::string name;    // one of H1, H2, H3, A1, A2, A3, A4
  std::string clause;  // e.g. "(ii) Lipschitz in x"
  CheckStatus status = CheckStatus::unchecked;
  double measured = 0.0;
  std::vector<double> worst_point;  // (r, x..., u...) or (x...) depending on the clause
  std::string note;
};

struct AssumptionReport {
  std::vector<AssumptionEntry> entries;
  bool all_measured_pass() const;
  const AssumptionEntry* find(const std::string& name, const std::string& clause_prefix) const;
};

/// Sampling box for validate_assumptions. Empty control box means "use U".
struct ProbeBox {
  Interval time{0.0, 1.0};
  Interval state{-1.0, 1.0};
  std::optional<Interval> control;
  Interval y{-5.0, 5.0};
  Interval z{-5.0, 5.0};
  int samples = 400;
  double lipschitz_cap = 1e6;
};

AssumptionReport validate_assumptions(const ControlModel& model, const ProbeBox& probe, std::uint64_t seed);

struct ModelParams {
  double horizon = 1.0;
  int control_grid_points = 11;
};

/// b = x + u, sigma = x, f = y + u, Phi = x, h = x e^{2T}, U = [0, 1].
ControlModel example_classical(const ModelParams& params = {});
/// b = x u, sigma = x, f = -|y|, Phi = x, h = max(x, 0), U = [1, 2].
ControlModel example_viscosity(const ModelParams& params = {});
/// b = sigma = f = 0, Phi = 0, h = 1.
ControlModel zero_model(const ModelParams& params = {});
/// Zero dynamics, f = y, Phi = 1, h = 1e9 (never binding).
ControlModel inert_linear_model(const ModelParams& params = {});
/// Bounded Lipschitz instance drawn from a fixed family of coefficient shapes.
ControlModel random_model(std::uint64_t seed, const ModelParams& params = {});

/// Catalog lookup; names: example-classical, example-viscosity, zero, inert-linear.
ControlModel make_model(const std::string& name, const ModelParams& params = {});
std::vector<std::string> model_catalog();

}  // namespace rfbsde
