#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfbsde/grid.hpp"
#include "rfbsde/model.hpp"

namespace rfbsde {

struct SurfaceDerivatives {
  double wt = 0.0;
  double wx = 0.0;
  double wxx = 0.0;
};

using SurfaceFn = std::function<double(double t, double x)>;

/// Scalar-state value surface W[i][j] on a SpaceTimeGrid.
class ValueSurface {
 public:
  ValueSurface(SpaceTimeGrid grid, std::vector<double> values, std::string provenance,
               std::vector<double> kinks = {});

  const SpaceTimeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const std::string& provenance() const { return provenance_; }
  /// Declared non-differentiable x positions.
  const std::vector<double>& kinks() const { return kinks_; }

  double at(std::size_t i, std::size_t j) const { return values_[grid_.index(i, j)]; }

  /// True when the three-point stencil around column j touches a declared kink.
  bool is_kink_column(std::size_t j) const;

  /// Closed-form evaluation (candidate surfaces) or bilinear interpolation.
  double value_at(double t, double x) const;
  bool has_exact() const { return static_cast<bool>(exact_); }
  void set_exact(SurfaceFn fn) { exact_ = std::move(fn); }

  /// Forward difference in t (backward on the last row); central in x at
  /// interior columns, second-order one-sided at the edges. Throws at kink columns.
  SurfaceDerivatives derivatives(std::size_t i, std::size_t j) const;
  double wt(std::size_t i, std::size_t j) const;
  double wx(std::size_t i, std::size_t j) const;
  /// (left, right) first differences; needs 0 < j < N_x.
  std::pair<double, double> one_sided_slopes(std::size_t i, std::size_t j) const;

  // Free-form metadata carried into CSV headers.
  std::string model_name;
  std::string scheme;
  std::size_t substeps = 1;

 private:
  SpaceTimeGrid grid_;
  std::vector<double> values_;
  std::string provenance_;
  std::vector<double> kinks_;
  SurfaceFn exact_;
};

void write_surface_csv(std::ostream& out, const ValueSurface& surface);
ValueSurface read_surface_csv(std::istream& in);

/// Closed-form candidate by catalog name ("candidate-classical",
/// "candidate-viscosity", "candidate-zero") sampled on the grid.
ValueSurface candidate_surface(const std::string& name, const SpaceTimeGrid& grid, double horizon);
std::vector<std::string> candidate_catalog();

/// Non-differentiable x positions known for a catalog model.
std::vector<double> declared_kinks(const std::string& model_name);

struct HamiltonianQuery {
  double r = 0.0;
  std::vector<double> x;
  double y = 0.0;
  std::vector<double> p;
  std::vector<double> P;  // n x n row-major, symmetric
  std::vector<double> u;
};

/// tr(a P) + p.b + f(r, x, y, p^T sigma, u).
double hamiltonian(const ControlModel& model, const HamiltonianQuery& q);
/// Scalar shortcut for n = d = m = 1.
double hamiltonian(const ControlModel& model, double r, double x, double y, double p, double P, double u);

struct InfHamiltonian {
  double value = 0.0;
  std::vector<std::size_t> argmin;  // control grid indices within the tie tolerance
  std::vector<double> canonical;    // lexicographically smallest minimizer
};

/// Grid search over the discretized control set.
InfHamiltonian inf_hamiltonian(const ControlModel& model, double r, std::span<const double> x, double y,
                               std::span<const double> p, std::span<const double> P);
InfHamiltonian inf_hamiltonian(const ControlModel& model, double r, double x, double y, double p, double P);

enum class HjbScheme { explicit_euler, policy_iteration };
enum class BoundaryRule { quadratic_extrapolation, linear_extrapolation, one_sided_pde };

struct HjbConfig {
  HjbScheme scheme = HjbScheme::explicit_euler;
  BoundaryRule boundary = BoundaryRule::quadratic_extrapolation;
  /// Explicit substeps per output row; 0 chooses the smallest count meeting the CFL bound.
  std::size_t substeps = 0;
  /// Required sigma^2 dt / dx^2 bound for the explicit scheme.
  double cfl = 0.9;
  int policy_max_iterations = 50;
  double policy_tol = 1e-10;
  /// 0 projects onto the obstacle; > 0 replaces the projection by the penalty term n (W - h)^+.
  double penalty = 0.0;
  std::vector<double> kinks;
  int workers = 1;
};

std::string to_string(HjbScheme s);
std::string to_string(BoundaryRule b);

/// Largest explicit time step allowed by the CFL bound on this grid.
double explicit_dt_limit(const ControlModel& model, const SpaceTimeGrid& grid, double cfl);

ValueSurface solve_obstacle_hjb(const ControlModel& model, const SpaceTimeGrid& grid, const HjbConfig& config = {});

/// max{W - h, -W_t - inf H} at interior nodes; NaN elsewhere. Kink columns use
/// the midpoint of the one-sided slopes and P = 0.
struct ResidualField {
  SpaceTimeGrid grid;
  std::vector<double> values;
  double max_abs(std::size_t band = 0) const;
};

ResidualField residual(const ValueSurface& surface, const ControlModel& model);

void write_residual_csv(std::ostream& out, const ResidualField& field);

struct SurfaceError {
  double max_relative = 0.0;
  double max_absolute = 0.0;
  double worst_t = 0.0;
  double worst_x = 0.0;
  std::size_t nodes = 0;
};

/// Max error of `surface` against `reference` over all time rows, skipping
/// `edge_band` columns at each box edge and columns within `kink_band` of a
/// reference kink. Relative error divides by |reference|.
SurfaceError compare_surfaces(const ValueSurface& surface, const ValueSurface& reference, std::size_t edge_band,
                              double kink_band = 0.0);

}  // namespace rfbsde
