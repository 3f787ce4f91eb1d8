#include <doctest.h>

#include <cmath>

#include "rfbsde/error.hpp"
#include "rfbsde/rbsde.hpp"

using namespace rfbsde;

namespace {
double zero(double, double) { return 0.0; }
}

TEST_CASE("inert linear model") {
  const auto m = inert_linear_model();
  // the consistent tree reproduces the implicit Euler recursion exactly
  CHECK(tree_oracle(m, 0.0, 1.0, zero, 10, TreeScheme::mc_consistent) ==
        doctest::Approx(std::pow(0.9, -10.0)).epsilon(1e-12));
  // trapezoidal driver: ((1 + dt/2) / (1 - dt/2))^N
  CHECK(tree_oracle(m, 0.0, 1.0, zero, 10) == doctest::Approx(std::pow(1.05 / 0.95, 10.0)).epsilon(1e-12));
  CHECK(std::fabs(tree_oracle(m, 0.0, 1.0, zero, 16) - std::exp(1.0)) < 2e-3);
}

TEST_CASE("classical example converges to e^2") {
  const auto m = example_classical();
  const double v14 = tree_oracle(m, 0.0, 1.0, zero, 14);
  const double v16 = tree_oracle(m, 0.0, 1.0, zero, 16);
  CHECK(std::fabs(v16 / std::exp(2.0) - 1.0) < 2e-2);
  CHECK(std::fabs(v16 - std::exp(2.0)) <= std::fabs(v14 - std::exp(2.0)) + 1e-12);
}

TEST_CASE("degenerate start and zero model") {
  CHECK(tree_oracle(example_viscosity(), 0.0, 0.0, [](double, double) { return 1.0; }, 12) == 0.0);
  CHECK(tree_oracle(zero_model(), 0.0, 1.0, zero, 8) == 0.0);
}

TEST_CASE("obstacle caps the tree value") {
  // b = x u with u = 2 and h = max(x, 0): without reflection Y would exceed x for x > 0
  const auto m = example_viscosity();
  const double v = tree_oracle(m, 0.0, 1.0, [](double, double) { return 2.0; }, 12);
  CHECK(v <= 1.0 + 1e-12);
}

TEST_CASE("argument validation") {
  const auto m = example_classical();
  CHECK_THROWS_AS(tree_oracle(m, 0.0, 1.0, zero, 0), ConfigError);
  CHECK_THROWS_AS(tree_oracle(m, 0.0, 1.0, zero, 21), ConfigError);
  CHECK_THROWS_AS(tree_oracle(m, 1.0, 1.0, zero, 4), ConfigError);
  CHECK_THROWS_AS(tree_oracle(m, 0.0, 1.0, [](double, double) { return 3.0; }, 4), ConfigError);
}
