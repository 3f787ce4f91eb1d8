#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rfbsde/error.hpp"
#include "rfbsde/synthesis.hpp"

using namespace rfbsde;

TEST_CASE("classical candidate yields the zero law") {
  const SpaceTimeGrid g{0.0, 1.0, 50, 0.1, 5.0, 40};
  const auto law = extract_feedback(candidate_surface("candidate-classical", g, 1.0), example_classical());
  for (double u : law.table()) CHECK(u == 0.0);
  CHECK(check_law_regularity(law).member);
}

TEST_CASE("viscosity candidate switches control across the kink") {
  // W = x on x > 0: p = 1, argmin of p x u is u = 1; on x < 0 p > 0 and x u is smallest at u = 2
  const SpaceTimeGrid g{0.0, 1.0, 20, -2.0, 2.0, 40};
  const auto law = extract_feedback(candidate_surface("candidate-viscosity", g, 1.0), example_viscosity());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    CHECK(law.at(i, 35)[0] == 1.0);
    CHECK(law.at(i, 5)[0] == 2.0);
  }
  const auto reg = check_law_regularity(law);
  CHECK_FALSE(reg.member);
  CHECK(reg.max_jump == doctest::Approx(1.0));
  CHECK(reg.jump_threshold == doctest::Approx(0.5));
}

TEST_CASE("feedback evaluation refuses irregular laws unless overridden") {
  const auto m = example_viscosity();
  const SpaceTimeGrid g{0.0, 1.0, 20, -2.0, 2.0, 40};
  const auto law = extract_feedback(candidate_surface("candidate-viscosity", g, 1.0), m);
  const TimeGrid tg{0.0, 1.0, 20};
  try {
    evaluate_feedback(m, law, 0.0, 0.5, tg, 100, 1, {});
    FAIL("expected refusal");
  } catch (const ConfigError& e) {
    CHECK(e.code() == "E_LAW_NOT_ADMISSIBLE");
  }
  CHECK(std::isfinite(evaluate_feedback(m, law, 0.0, 0.5, tg, 100, 1, {}, true).value));
}

TEST_CASE("constant law cost equals the open-loop cost") {
  const auto m = example_classical();
  const SpaceTimeGrid g{0.0, 1.0, 10, 0.0, 5.0, 10};
  const TimeGrid tg{0.0, 1.0, 40};
  const double x0[1] = {1.0};
  const auto a = evaluate_feedback(m, FeedbackLaw::constant(g, m.controls, {0.0}), 0.0, 1.0, tg, 2000, 3, {});
  const auto b = cost_functional(m, 0.0, x0, OpenLoopControl::constant({0.0}), tg, 2000, 3, {});
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
}

TEST_CASE("law CSV round trip") {
  const SpaceTimeGrid g{0.0, 1.0, 6, -2.0, 2.0, 8};
  const auto law = extract_feedback(candidate_surface("candidate-viscosity", g, 1.0), example_viscosity());
  std::stringstream ss;
  write_law_csv(ss, law);
  const auto back = read_law_csv(ss);
  CHECK(back.table() == law.table());
  CHECK(back.tie_break() == law.tie_break());
  CHECK(back.grid() == g);
}

TEST_CASE("law values must lie in U") {
  const SpaceTimeGrid g{0.0, 1.0, 2, 0.0, 1.0, 2};
  CHECK_THROWS_AS(FeedbackLaw::constant(g, ControlSet::interval(1.0, 2.0, 3), {0.0}), ConfigError);
  const auto law = FeedbackLaw::constant(g, ControlSet::interval(1.0, 2.0, 3), {1.5});
  double u[1];
  law.evaluate(9.0, -9.0, u);
  CHECK(u[0] == 1.5);
}
