#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rfbsde/feedback_law.hpp"
#include "rfbsde/hjb.hpp"
#include "rfbsde/rbsde.hpp"

namespace rfbsde {

/// Canonical argmin of the Hamiltonian at every surface node. Kink columns use
/// the midpoint of the one-sided slopes and P = 0.
FeedbackLaw extract_feedback(const ValueSurface& surface, const ControlModel& model, int workers = 1);

struct LawRegularityReport {
  double lipschitz = 0.0;               // max |u(t, x_{j+1}) - u(t, x_j)| / dx
  std::vector<double> slice_max_jump;   // per time row
  double max_jump = 0.0;
  double jump_threshold = 0.0;          // (max U - min U) / 2
  double time_variation = 0.0;          // max |u(t_{i+1}, x) - u(t_i, x)|
  bool member = true;
  std::string note;
};

LawRegularityReport check_law_regularity(const FeedbackLaw& law);

/// J(t, x; u(., X(.))) by closed-loop simulation and the reflected solver.
/// Refuses laws failing the regularity check unless override_admissibility is set.
CostEstimate evaluate_feedback(const ControlModel& model, const FeedbackLaw& law, double t, double x,
                               const TimeGrid& grid, std::size_t paths, std::uint64_t seed, const SolverConfig& config,
                               bool override_admissibility = false);

void write_law_csv(std::ostream& out, const FeedbackLaw& law);
FeedbackLaw read_law_csv(std::istream& in);

}  // namespace rfbsde
