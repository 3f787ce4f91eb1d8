#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "rfbsde/error.hpp"
#include "rfbsde/rbsde.hpp"

using namespace rfbsde;

namespace {
const double kOne[1] = {1.0};

SolverConfig tight() {
  SolverConfig c;
  c.picard_iterations = 60;
  c.picard_tol = 1e-14;
  return c;
}
}  // namespace

TEST_CASE("inert linear model matches the implicit recursion") {
  // Y_i = Y_{i+1} + Y_i dt  =>  Y_0 = (1 - dt)^{-N}
  const auto m = inert_linear_model();
  const std::size_t N = 25;
  const auto est = cost_functional(m, 0.0, kOne, OpenLoopControl::constant({0.0}), {0.0, 1.0, N}, 200, 3, tight());
  CHECK(est.value == doctest::Approx(std::pow(1.0 - 1.0 / N, -double(N))).epsilon(1e-12));
  CHECK(est.standard_error == doctest::Approx(0.0));
}

TEST_CASE("zero model has zero cost") {
  const auto est =
      cost_functional(zero_model(), 0.0, kOne, OpenLoopControl::constant({0.0}), {0.0, 1.0, 10}, 100, 1, {});
  CHECK(est.value == 0.0);
  CHECK(est.standard_error == 0.0);
}

TEST_CASE("reflected solution satisfies the obstacle and Skorokhod conditions") {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto m = random_model(s);
    const auto e = simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({m.controls.grid()[0]}),
                                  {0.0, m.horizon, 40}, 2000, 100 + s);
    const auto sol = solve_reflected(m, e, {});
    const auto& d = sol.diagnostics;
    CHECK(d.max_obstacle_violation <= 0.0);
    CHECK(d.max_negative_dk == 0.0);
    CHECK(d.terminal_mismatch == 0.0);
    double ymax = 0.0;
    for (double y : sol.Y) ymax = std::max(ymax, std::fabs(y));
    CHECK(d.max_skorokhod_slack <= 1e-8 * (1.0 + ymax));
    for (std::size_t p = 0; p < sol.paths; ++p) CHECK(sol.k(p, 0) == 0.0);
  }
}

TEST_CASE("penalized values decrease toward the reflected value") {
  const auto m = example_classical();
  const auto e = simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({0.0}), {0.0, 1.0, 50}, 4000, 8);
  const double refl = solve_reflected(m, e, {}).value();
  double prev = std::numeric_limits<double>::infinity();
  for (double n : {1.0, 10.0, 100.0, 1000.0}) {
    const double v = solve_penalized(m, e, n, {}).value();
    CHECK(v <= prev + 1e-12);
    CHECK(v >= refl - 1e-9);
    prev = v;
  }
}

TEST_CASE("bootstrap SE agrees with the analytic SE") {
  std::vector<double> xs(4000);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = (i % 2 == 0) ? 1.0 : -1.0;
  // sample sd is 1, so SE = 1 / sqrt(n)
  const double se = bootstrap_standard_error(xs, 400, 5);
  CHECK(se == doctest::Approx(1.0 / std::sqrt(4000.0)).epsilon(0.1));
  CHECK(bootstrap_standard_error(xs, 400, 5) == se);
}

TEST_CASE("regression recovers a polynomial conditional expectation") {
  const std::size_t M = 500;
  std::vector<double> x(M), y(M), out(M);
  for (std::size_t p = 0; p < M; ++p) {
    x[p] = -1.0 + 2.0 * p / (M - 1);
    y[p] = 2.0 - x[p] + 0.5 * x[p] * x[p] * x[p];
  }
  const ConditionalExpectation ce(x, M, 1, {});
  ce.project(y, out);
  for (std::size_t p = 0; p < M; ++p) CHECK(out[p] == doctest::Approx(y[p]).epsilon(1e-9));
}

TEST_CASE("invalid solver settings are config errors") {
  SolverConfig c;
  c.degree = -1;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = {};
  c.picard_iterations = 0;
  CHECK_THROWS_AS(c.check(), ConfigError);
}

TEST_CASE("unfinished Picard iterations are counted") {
  SolverConfig c;
  c.picard_iterations = 2;
  c.picard_tol = 1e-15;
  const auto m = inert_linear_model();
  const auto e = simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({0.0}), {0.0, 1.0, 4}, 10, 1);
  const auto sol = solve_reflected(m, e, c);
  CHECK(sol.diagnostics.picard_unconverged == 40);
  CHECK(sol.diagnostics.max_picard_update > 0.0);
  CHECK(solve_reflected(m, e, tight()).diagnostics.picard_unconverged == 0);
}

TEST_CASE("solution CSV lists every node") {
  const auto m = example_classical();
  const auto e = simulate_paths(m, 0.0, kOne, OpenLoopControl::constant({0.0}), {0.0, 1.0, 3}, 2, 1);
  std::ostringstream os;
  write_solution_csv(os, solve_reflected(m, e, {}));
  const std::string s = os.str();
  CHECK(s.find("path,node,Y,Z0,K") != std::string::npos);
  CHECK(std::count(s.begin(), s.end(), '\n') >= 8);
}
