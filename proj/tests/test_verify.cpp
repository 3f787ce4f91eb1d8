#include <doctest.h>

#include <cmath>

#include "rfbsde/error.hpp"
#include "rfbsde/verify.hpp"

using namespace rfbsde;

namespace {
SpaceTimeGrid classical_grid() { return {0.0, 1.0, 100, 0.1, 5.0, 100}; }
SpaceTimeGrid viscosity_grid() { return {0.0, 1.0, 100, -5.0, 5.0, 200}; }

McConfig small_mc() {
  McConfig mc;
  mc.paths = 4000;
  mc.steps = 50;
  mc.sample_times = 4;
  mc.sample_paths = 8;
  return mc;
}
}  // namespace

TEST_CASE("battery layout") {
  const auto b = make_battery(example_classical(), 0.0, 5, 3, 2024);
  REQUIRE(b.size() == 16);
  CHECK(b.front().label() == "constant(0)");
  CHECK(b[10].label() == "constant(1)");
  CHECK(b[11].label() == "random-0");
  const auto again = make_battery(example_classical(), 0.0, 5, 3, 2024);
  double u1[1], u2[1];
  b[13].value(0, 0, 0.37, u1);
  again[13].value(0, 0, 0.37, u2);
  CHECK(u1[0] == u2[0]);
}

TEST_CASE("classical verification passes for the zero law and fails for u = 1") {
  const auto m = example_classical();
  const auto w = candidate_surface("candidate-classical", classical_grid(), 1.0);
  const auto zero = FeedbackLaw::constant(w.grid(), m.controls, {0.0});
  auto ok = verify_classical(m, w, 0.0, 1.0, zero, make_battery(m, 0.0, 2, 4, 7), small_mc());
  CHECK(ok.aggregate == Verdict::pass);
  CHECK(ok.exit_code() == 0);
  // At t = 0 the obstacle x e^{2T} equals W and caps every cost, so the
  // suboptimal law is only visible at a later start time.
  const auto one = FeedbackLaw::constant(w.grid(), m.controls, {1.0});
  auto bad = verify_classical(m, w, 0.5, 1.0, one, make_battery(m, 0.5, 2, 4, 7), small_mc());
  REQUIRE(bad.find("B: W = J(law)") != nullptr);
  CHECK(bad.find("B: W = J(law)")->verdict == Verdict::fail);
  CHECK(bad.exit_code() == 1);
  CHECK(bad.to_json().find("\"aggregate\"") != std::string::npos);
}

TEST_CASE("classical verification refuses kinked surfaces") {
  const auto m = example_viscosity();
  const auto w = candidate_surface("candidate-viscosity", viscosity_grid(), 1.0);
  const auto law = FeedbackLaw::constant(w.grid(), m.controls, {1.0});
  CHECK_THROWS_AS(verify_classical(m, w, 0.0, 0.0, law, {}, small_mc()), ConfigError);
}

TEST_CASE("viscosity conditions at the kink have zero slack") {
  const auto m = example_viscosity();
  const auto w = candidate_surface("candidate-viscosity", viscosity_grid(), 1.0);
  const TripleFn good = [](double s, double x) { return SuperdiffCandidate{s, x, 0.0, 1.0, 0.0}; };
  auto rep = verify_viscosity_conditions(m, w, 0.0, 0.0, OpenLoopControl::constant({1.0}), good, small_mc());
  CHECK(rep.aggregate == Verdict::pass);
  for (const auto& c : rep.conditions) CHECK(c.slack == 0.0);
  const TripleFn bad = [](double s, double x) { return SuperdiffCandidate{s, x, 0.0, 1.0, -1.0}; };
  rep = verify_viscosity_conditions(m, w, 0.0, 0.0, OpenLoopControl::constant({1.0}), bad, small_mc());
  CHECK(rep.find("(i) triple in right superdifferential")->verdict == Verdict::fail);
  CHECK(rep.aggregate == Verdict::fail);
}

TEST_CASE("feedback optimality rejects the constant-one law") {
  const auto m = example_classical();
  // forward time differences bias q by O(dt), so the tables need a fine time axis
  const auto w = candidate_surface("candidate-classical", {0.0, 1.0, 2000, 0.1, 5.0, 100}, 1.0);
  const auto tables = TripleTables::from_surface(w);
  auto mc = small_mc();
  mc.paths = 20000;
  auto ok = verify_feedback_optimality(m, w, FeedbackLaw::constant(w.grid(), m.controls, {0.0}), tables, 0.0, 1.0, mc);
  CHECK(ok.aggregate == Verdict::pass);
  auto bad = verify_feedback_optimality(m, w, FeedbackLaw::constant(w.grid(), m.controls, {1.0}), tables, 0.0, 1.0, mc);
  CHECK(bad.find("(i) E int [q + H(law)] ds <= 0")->verdict == Verdict::fail);
}

TEST_CASE("triple tables") {
  const auto g = viscosity_grid();
  const auto t = TripleTables::constant(g, 0.0, 1.0, 0.0);
  CHECK(t.at(3, 7).p == 1.0);
  CHECK(t.nearest(0.5, 0.01).p == 1.0);
  CHECK(t.interpolate(0.503, 0.01).p == doctest::Approx(1.0));
  const auto w = candidate_surface("candidate-viscosity", g, 1.0);
  const auto s = TripleTables::from_surface(w);
  // midpoint of the one-sided slopes at the kink column
  CHECK(s.at(0, 100).p == doctest::Approx(0.5 * (1.0 + std::exp(3.0))).epsilon(1e-9));
  CHECK(s.at(0, 100).P == 0.0);
}

TEST_CASE("pointwise inequalities need validated triples") {
  const auto m = example_classical();
  const auto w = candidate_surface("candidate-classical", classical_grid(), 1.0);
  const double e1 = std::exp(1.0);
  std::vector<InequalitySample> ok{{{0.5, 1.0, -2.0 * e1, e1, 0.0}, DiffKind::super},
                                   {{0.5, 1.0, -2.0 * e1, e1, 0.0}, DiffKind::sub}};
  CHECK(check_viscosity_inequalities(w, m, ok, 1e-6).aggregate == Verdict::pass);
  std::vector<InequalitySample> bad{{{0.5, 1.0, -2.0 * e1 - 5.0, e1, 0.0}, DiffKind::super}};
  CHECK_THROWS_AS(check_viscosity_inequalities(w, m, bad), ConfigError);
}

TEST_CASE("D1 and D2 on both candidates") {
  const auto a = check_D1_D2(candidate_surface("candidate-classical", classical_grid(), 1.0), 0.1);
  CHECK(std::isfinite(a.c1));
  CHECK(a.d1_pass);
  CHECK(a.d2_pass);
  CHECK_FALSE(a.has_kink);
  const auto b = check_D1_D2(candidate_surface("candidate-viscosity", viscosity_grid(), 1.0), 0.1);
  CHECK(std::isfinite(b.c1));
  CHECK(b.has_kink);
  CHECK(b.kink_second_difference <= 0.0);
  CHECK(b.d2_pass);
}
