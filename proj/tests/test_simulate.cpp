#include <doctest.h>

#include <cmath>

#include "rfbsde/error.hpp"
#include "rfbsde/simulate.hpp"

using namespace rfbsde;

namespace {
const double kOne[1] = {1.0};
}

TEST_CASE("zero dynamics keep the state fixed") {
  const auto m = zero_model();
  const auto e = simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({0.0}), {0.0, 1.0, 20}, 50, 4);
  for (std::size_t i = 0; i <= 20; ++i)
    for (std::size_t p = 0; p < 50; ++p) CHECK(e.state(p, i) == 1.0);
}

TEST_CASE("paths are reproducible across seeds and workers") {
  const auto m = example_classical();
  const TimeGrid g{0.0, 1.0, 50};
  const auto u = OpenLoopControl::constant({0.5});
  const auto a = simulate_paths(m, 0.0, kOne, u, g, 300, 9, 1);
  const auto b = simulate_paths(m, 0.0, kOne, u, g, 300, 9, 3);
  const auto c = simulate_paths(m, 0.0, kOne, u, g, 300, 10, 1);
  CHECK(a.states == b.states);
  CHECK(a.states != c.states);
}

TEST_CASE("Euler mean matches the discrete recursion") {
  // E X_{i+1} = (1 + dt) E X_i for b = x, sigma = x
  const auto m = example_classical();
  const std::size_t N = 40, M = 40000;
  const auto e = simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({0.0}), {0.0, 1.0, N}, M, 21);
  double s = 0, s2 = 0;
  for (std::size_t p = 0; p < M; ++p) {
    s += e.state(p, N);
    s2 += e.state(p, N) * e.state(p, N);
  }
  const double mean = s / M, se = std::sqrt((s2 / M - mean * mean) / M);
  CHECK(std::fabs(mean - std::pow(1.0 + 1.0 / N, N)) <= 4.0 * se);
}

TEST_CASE("controls outside U are rejected") {
  const auto m = example_viscosity();
  CHECK_THROWS_AS(simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({0.5}), {0.0, 1.0, 4}, 2, 1), ConfigError);
  CHECK_THROWS_AS(simulate_paths(m, 0.5, kOne, OpenLoopControl::constant({1.0}), {0.0, 1.0, 4}, 2, 1), ConfigError);
}

TEST_CASE("closed loop under a constant law equals the open loop") {
  const auto m = example_classical();
  const TimeGrid g{0.0, 1.0, 30};
  const SpaceTimeGrid sg{0.0, 1.0, 10, -5.0, 5.0, 10};
  const auto law = FeedbackLaw::constant(sg, m.controls, {0.3});
  const auto a = simulate_closed_loop(m, law, 0.0, kOne, g, 100, 5);
  const auto b = simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({0.3}), g, 100, 5);
  CHECK(a.states == b.states);
  const auto rec = recorded_control(a);
  CHECK_FALSE(rec.deterministic());
}

TEST_CASE("piecewise controls switch at the given times") {
  const auto u = OpenLoopControl::piecewise({0.5}, {{0.2}, {0.8}});
  double v[1];
  u.value(0, 0, 0.25, v);
  CHECK(v[0] == 0.2);
  u.value(0, 0, 0.75, v);
  CHECK(v[0] == 0.8);
}

TEST_CASE("moment check is finite") {
  const auto m = example_classical();
  const auto e = simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({1.0}), {0.0, 1.0, 50}, 2000, 2);
  const auto r = moment_check(e, 2);
  CHECK(std::isfinite(r.ratio));
  CHECK(r.sup_moment >= 1.0);
}
