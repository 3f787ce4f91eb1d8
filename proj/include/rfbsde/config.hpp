#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfbsde/hjb.hpp"
#include "rfbsde/model.hpp"
#include "rfbsde/rbsde.hpp"
#include "rfbsde/verify.hpp"

namespace rfbsde {

/// Everything one CLI invocation needs. Parsed from JSON; unknown keys are errors.
struct RunConfig {
  std::string command;

  std::string model = "example-classical";
  double horizon = 1.0;
  int control_grid_points = 11;

  // Space-time grid; unset box edges take model defaults.
  std::size_t time_steps = 4000;
  std::size_t space_steps = 200;
  std::optional<double> x_lo, x_hi;

  HjbConfig hjb;

  double t = 0.0;
  double x = 1.0;

  // cost
  std::string cost_method = "mc";  // mc | tree | feedback
  std::vector<double> control_value{0.0};
  int tree_depth = 16;
  TreeScheme tree_scheme = TreeScheme::second_order;

  McConfig mc;

  // verify
  std::string verify_mode = "classical";  // classical | viscosity | feedback
  std::string surface = "computed";      // computed | candidate-*
  std::string law = "extracted";         // extracted | constant
  std::vector<double> law_value{0.0};
  std::vector<double> triple{0.0, 1.0, 0.0};
  std::string tables = "surface";  // surface | constant
  std::size_t battery_random = 20;
  int battery_switches = 8;
  std::uint64_t battery_seed = 2024;
  double d1d2_delta = 0.1;

  // assumptions
  ProbeBox probe_box{{0.0, 1.0}, {-5.0, 5.0}};
  std::uint64_t probe_seed = 3;

  std::string out_dir = "out";
  int workers = 1;

  SpaceTimeGrid space_time_grid() const;
  ModelParams model_params() const { return {horizon, control_grid_points}; }
};

/// Parses JSON text; throws ConfigError naming the offending key path.
RunConfig parse_config(const std::string& json_text);
/// Canonical JSON of the effective configuration with a fixed key order.
std::string canonical_json(const RunConfig& config);
/// FNV-1a 64-bit hash of the canonical JSON, as 16 hex digits.
std::string fingerprint(const RunConfig& config);

/// Default state box for a catalog model.
std::pair<double, double> default_box(const std::string& model);

}  // namespace rfbsde
