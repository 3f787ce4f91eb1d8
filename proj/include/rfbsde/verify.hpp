#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rfbsde/hjb.hpp"
#include "rfbsde/rbsde.hpp"
#include "rfbsde/synthesis.hpp"

namespace rfbsde {

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

/// Candidate second-order parabolic Taylor data (q, p, P) at (t, x); scalar state.
struct SuperdiffCandidate {
  double t = 0.0;
  double x = 0.0;
  double q = 0.0;
  double p = 0.0;
  double P = 0.0;
};

enum class TimeProbe { right, two_sided };
enum class DiffKind { super, sub };
enum class Membership { member, non_member, inconclusive };
std::string to_string(Membership m);

struct MembershipProbe {
  /// Decreasing radii; default 1e-2 down to 1e-8 in half-decades.
  std::vector<double> radii = default_radii();
  int samples = 200;
  std::uint64_t seed = 11;
  double tol = 1e-3;
  /// Slope budget c in the envelope Q(rho) <= tol + c sqrt(rho).
  double slope_budget = 100.0;
  /// Quotient level at the smallest radius that counts as bounded away from 0.
  double nonmember_floor = 1e-2;
  /// Number of smallest radii used by the verdict.
  int tail = 3;
  TimeProbe time = TimeProbe::right;
  DiffKind kind = DiffKind::super;

  static std::vector<double> default_radii();
};

struct MembershipResult {
  Membership verdict = Membership::inconclusive;
  /// max over tail radii of Q(rho) - c sqrt(rho); <= tol means member.
  double margin = 0.0;
  std::vector<double> radii;
  std::vector<double> max_quotient;
  /// Least-squares fit Q ~ a + c sqrt(rho) over all radii, for reporting.
  double fitted_intercept = 0.0;
  double fitted_slope = 0.0;
  std::string note;
};

/// Samples (s, y) near (t, x) with |y - x| <= sqrt(rho) and s in (t, t + rho]
/// (right) or [t - rho, t + rho] (two-sided). The two-sided sample set contains
/// the right one, so two-sided membership implies right membership.
MembershipResult check_superdiff_membership(const ValueSurface& surface, const SuperdiffCandidate& cand,
                                            const MembershipProbe& probe = {});

struct ConditionRecord {
  std::string name;
  double slack = 0.0;
  double tolerance = 0.0;
  Verdict verdict = Verdict::pass;
  std::string note;
};

struct VerificationReport {
  std::string theorem;
  std::vector<ConditionRecord> conditions;
  Verdict aggregate = Verdict::pass;
  std::vector<std::pair<std::string, std::string>> fingerprint;

  void add(ConditionRecord c);
  const ConditionRecord* find(const std::string& name) const;
  /// 0 on pass, 1 otherwise.
  int exit_code() const { return aggregate == Verdict::pass ? 0 : 1; }
  std::string to_json() const;
  std::string summary() const;
};

struct McConfig {
  std::size_t paths = 100000;
  std::size_t steps = 200;
  std::uint64_t seed = 1;
  SolverConfig solver;
  /// Absolute scheme-bias budget added to 3 SE in value comparisons.
  double bias_budget = 0.05;
  double tol_z = 0.1;
  std::size_t sample_times = 16;
  std::size_t sample_paths = 64;
  double member_rate = 0.95;
  /// Tolerance of the pointwise inequality inf [q + H] >= W - h.
  double tol_pointwise = 1e-3;
  MembershipProbe probe;
};

/// Constants on the control grid plus seeded random piecewise-constant controls on [t, T].
std::vector<OpenLoopControl> make_battery(const ControlModel& model, double t, std::size_t random_count = 20,
                                          int switches = 8, std::uint64_t seed = 2024);

/// Conditions A (W <= J for the battery), B (W = J under the law) and C (law regularity).
VerificationReport verify_classical(const ControlModel& model, const ValueSurface& surface, double t, double x,
                                    const FeedbackLaw& law, const std::vector<OpenLoopControl>& battery,
                                    const McConfig& mc);

using TripleFn = std::function<SuperdiffCandidate(double s, double x)>;

/// Conditions (i) membership along paths, (ii) p sigma = Z, (iii) E int [q + H] ds <= 0,
/// plus a battery re-check of W(t, x) against sampled costs when a battery is given.
VerificationReport verify_viscosity_conditions(const ControlModel& model, const ValueSurface& surface, double t,
                                               double x, const OpenLoopControl& control, const TripleFn& triple,
                                               const McConfig& mc, const std::vector<OpenLoopControl>& battery = {});

/// Grid tables (q, p, P) aligned with a surface grid.
struct TripleTables {
  SpaceTimeGrid grid;
  std::vector<double> q, p, P;

  static TripleTables constant(const SpaceTimeGrid& grid, double q, double p, double P);
  /// Finite-difference derivatives of the surface; kink columns use the midpoint slope and P = 0.
  static TripleTables from_surface(const ValueSurface& surface);
  SuperdiffCandidate at(std::size_t i, std::size_t j) const;
  SuperdiffCandidate nearest(double t, double x) const;
  /// Bilinear in (t, x), clamped to the grid box.
  SuperdiffCandidate interpolate(double t, double x) const;
};

/// Pointwise inequality and membership at nodes visited by the closed loop,
/// then conditions (i) and (ii) along the closed-loop ensemble with
/// interpolated tables. Path nodes outside the table box are skipped.
VerificationReport verify_feedback_optimality(const ControlModel& model, const ValueSurface& surface,
                                              const FeedbackLaw& law, const TripleTables& tables, double t, double x,
                                              const McConfig& mc);

struct InequalitySample {
  SuperdiffCandidate triple;
  DiffKind kind = DiffKind::super;
};

/// max{W - h, -q - inf H} <= tol for super samples and >= -tol for sub samples.
/// Every triple is membership-checked first; a non-member is rejected with ConfigError.
VerificationReport check_viscosity_inequalities(const ValueSurface& surface, const ControlModel& model,
                                                const std::vector<InequalitySample>& samples, double tol = 1e-9,
                                                const MembershipProbe& probe = {});

struct D1D2Report {
  double delta = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double max_second_difference = 0.0;  // off kink columns
  /// Largest second difference on declared kink columns; NaN when there are none.
  double kink_second_difference = 0.0;
  bool has_kink = false;
  bool d1_pass = false;
  bool d2_pass = false;
};

D1D2Report check_D1_D2(const ValueSurface& surface, double delta);

}  // namespace rfbsde
