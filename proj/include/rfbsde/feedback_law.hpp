#pragma once

#include <span>
#include <string>
#include <vector>

#include "rfbsde/grid.hpp"
#include "rfbsde/model.hpp"

namespace rfbsde {

enum class LawInterpolation { nearest, bilinear };

/// Grid-aligned feedback control law u(t, x) with values in U.
class FeedbackLaw {
 public:
  FeedbackLaw(SpaceTimeGrid grid, ControlSet controls, std::vector<double> table,
              LawInterpolation interpolation = LawInterpolation::nearest,
              std::string tie_break = "lexicographic-min", std::string provenance = {});

  static FeedbackLaw constant(const SpaceTimeGrid& grid, const ControlSet& controls, std::vector<double> value);

  const SpaceTimeGrid& grid() const { return grid_; }
  const ControlSet& controls() const { return controls_; }
  int control_dim() const { return controls_.dim(); }
  LawInterpolation interpolation() const { return interpolation_; }
  const std::string& tie_break() const { return tie_break_; }
  const std::string& provenance() const { return provenance_; }
  const std::vector<double>& table() const { return table_; }

  std::span<const double> at(std::size_t i, std::size_t j) const;
  /// Value at (t, x); outside the grid the nearest edge node is used. Always in U.
  void evaluate(double t, double x, std::span<double> out) const;

 private:
  SpaceTimeGrid grid_;
  ControlSet controls_;
  std::vector<double> table_;
  LawInterpolation interpolation_;
  std::string tie_break_;
  std::string provenance_;
};

}  // namespace rfbsde
