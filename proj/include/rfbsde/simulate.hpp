#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rfbsde/feedback_law.hpp"
#include "rfbsde/grid.hpp"
#include "rfbsde/model.hpp"

namespace rfbsde {

/// Open-loop control: a constant, a deterministic function of time, or a
/// per-path, per-node table (node i value must depend on increments up to i).
class OpenLoopControl {
 public:
  using TimeFn = std::function<void(double t, std::span<double> out)>;

  static OpenLoopControl constant(std::vector<double> value);
  static OpenLoopControl of_time(int dim, TimeFn fn, std::string label);
  /// Piecewise constant in time: values[k] applies on [switch_times[k-1], switch_times[k]).
  static OpenLoopControl piecewise(std::vector<double> switch_times, std::vector<std::vector<double>> values);
  /// Node-major table: value for (path m, node i) at table[(i * paths + m) * dim].
  static OpenLoopControl table(std::size_t paths, std::size_t steps, int dim, std::vector<double> values);

  int dim() const { return dim_; }
  bool deterministic() const { return kind_ != Kind::table; }
  const std::string& label() const { return label_; }

  void value(std::size_t path, std::size_t node, double t, std::span<double> out) const;
  /// Throws ConfigError when a value on the grid falls outside U.
  void check(const ControlSet& controls, const TimeGrid& grid, std::size_t paths) const;

 private:
  enum class Kind { constant, time, table };
  Kind kind_ = Kind::constant;
  int dim_ = 1;
  std::vector<double> constant_;
  TimeFn fn_;
  std::size_t paths_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> table_;
  std::string label_;
};

/// Seeded Euler-Maruyama paths on a shared grid. Storage is node-major.
struct PathEnsemble {
  TimeGrid grid;
  std::size_t paths = 0;
  int state_dim = 1;
  int noise_dim = 1;
  int control_dim = 1;
  std::uint64_t seed = 0;
  /// (N+1) x M x n
  std::vector<double> states;
  /// N x M x d
  std::vector<double> increments;
  /// Either N x m (shared by all paths) or N x M x m.
  std::vector<double> controls;
  bool shared_controls = true;

  std::size_t steps() const { return grid.steps; }
  double state(std::size_t path, std::size_t node, int k = 0) const {
    return states[(node * paths + path) * static_cast<std::size_t>(state_dim) + static_cast<std::size_t>(k)];
  }
  std::span<const double> state_vec(std::size_t path, std::size_t node) const {
    return std::span<const double>(states).subspan((node * paths + path) * static_cast<std::size_t>(state_dim),
                                                   static_cast<std::size_t>(state_dim));
  }
  /// All path states at one node, M x n contiguous.
  std::span<const double> node_states(std::size_t node) const {
    const auto stride = paths * static_cast<std::size_t>(state_dim);
    return std::span<const double>(states).subspan(node * stride, stride);
  }
  double increment(std::size_t path, std::size_t node, int k = 0) const {
    return increments[(node * paths + path) * static_cast<std::size_t>(noise_dim) + static_cast<std::size_t>(k)];
  }
  std::span<const double> control(std::size_t path, std::size_t node) const;
};

/// Euler-Maruyama under an open-loop control. Requires t == grid.t0 and grid.t1 <= T.
PathEnsemble simulate_paths(const ControlModel& model, double t, std::span<const double> x,
                            const OpenLoopControl& control, const TimeGrid& grid, std::size_t paths,
                            std::uint64_t seed, int workers = 1);

/// Euler-Maruyama with u_i = law(r_i, X_i); the induced controls are stored per path.
PathEnsemble simulate_closed_loop(const ControlModel& model, const FeedbackLaw& law, double t,
                                  std::span<const double> x, const TimeGrid& grid, std::size_t paths,
                                  std::uint64_t seed, int workers = 1);

struct MomentReport {
  int k = 2;
  double sup_moment = 0.0;  // E sup_i |X_i|^k
  double initial_norm = 0.0;
  double ratio = 0.0;  // sup_moment / (1 + |x|^k)
};

MomentReport moment_check(const PathEnsemble& ensemble, int k);

/// Same per-path control table as the ensemble, usable as an open-loop control.
OpenLoopControl recorded_control(const PathEnsemble& ensemble);

void write_ensemble_csv(std::ostream& out, const PathEnsemble& ensemble);

}  // namespace rfbsde
