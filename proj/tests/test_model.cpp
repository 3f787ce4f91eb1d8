#include <doctest.h>

#include <cmath>

#include "rfbsde/error.hpp"
#include "rfbsde/model.hpp"

using namespace rfbsde;

TEST_CASE("classical example coefficients") {
  const auto m = example_classical({1.0, 11});
  CHECK(m.b(0.3, 2.0, 0.5) == doctest::Approx(2.5));
  CHECK(m.sigma(0.3, 2.0, 0.5) == doctest::Approx(2.0));
  CHECK(m.f(0.3, 2.0, 3.0, 7.0, 0.5) == doctest::Approx(3.5));
  CHECK(m.phi(1.7) == doctest::Approx(1.7));
  // the obstacle carries e^{2T}, not e^{2(T - t)}
  CHECK(m.h(0.0, 1.0) == doctest::Approx(std::exp(2.0)));
  CHECK(m.h(0.9, 1.0) == doctest::Approx(std::exp(2.0)));
  CHECK(example_classical({2.0, 11}).h(0.0, 1.0) == doctest::Approx(std::exp(4.0)));
  CHECK(m.scalar());
}

TEST_CASE("viscosity example coefficients") {
  const auto m = example_viscosity();
  CHECK(m.b(0.0, -2.0, 1.5) == doctest::Approx(-3.0));
  CHECK(m.f(0.0, 1.0, -4.0, 0.0, 1.0) == doctest::Approx(-4.0));
  CHECK(m.h(0.5, -1.0) == 0.0);
  CHECK(m.h(0.5, 2.0) == 2.0);
  CHECK(m.controls.bounds()[0].lo == 1.0);
  CHECK(m.controls.bounds()[0].hi == 2.0);
}

TEST_CASE("control set grid and projection") {
  const auto U = ControlSet::interval(0.0, 1.0, 11);
  REQUIRE(U.grid_size() == 11);
  CHECK(U.grid().front() == 0.0);
  CHECK(U.grid().back() == 1.0);
  CHECK(U.grid()[3] == doctest::Approx(0.3));
  const double inside[1] = {0.4}, outside[1] = {1.2};
  CHECK(U.contains(inside));
  CHECK_FALSE(U.contains(outside));
  double u[1] = {-3.0};
  U.project(u);
  CHECK(u[0] == 0.0);
  CHECK(U.max_width() == 1.0);
  CHECK_THROWS_AS(ControlSet::interval(1.0, 0.0, 3), ConfigError);
}

TEST_CASE("catalog lookup") {
  for (const auto& name : model_catalog()) CHECK_NOTHROW(make_model(name).check());
  try {
    make_model("no-such-model");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.exit_code() == 2);
  }
}

TEST_CASE("random instances are reproducible and bounded") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = random_model(s), b = random_model(s);
    for (double x : {-3.0, 0.0, 2.5}) {
      CHECK(a.b(0.2, x, 0.5) == b.b(0.2, x, 0.5));
      CHECK(a.sigma(0.2, x, 0.5) == b.sigma(0.2, x, 0.5));
      CHECK(std::isfinite(a.f(0.2, x, 1.0, 0.5, 0.5)));
      CHECK(a.phi(x) <= a.h(a.horizon, x));
    }
  }
}

TEST_CASE("assumption probes measure Lipschitz constants") {
  const auto m = example_classical();
  ProbeBox box;
  box.state = {-2.0, 2.0};
  const auto rep = validate_assumptions(m, box, 3);
  const auto* h1 = rep.find("H1", "(ii)");
  REQUIRE(h1 != nullptr);
  // |b(x) - b(y)| + |sigma(x) - sigma(y)| = 2 |x - y|
  CHECK(h1->measured == doctest::Approx(2.0).epsilon(1e-6));
  const auto* term = rep.find("H2", "(iii)");
  REQUIRE(term != nullptr);
  CHECK(term->status == CheckStatus::fail);  // Phi(x) = x exceeds x e^{2T} for x < 0
  box.state = {0.0, 2.0};
  CHECK(validate_assumptions(m, box, 3).find("H2", "(iii)")->status == CheckStatus::pass);
}
