#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rfbsde/error.hpp"
#include "rfbsde/hjb.hpp"

using namespace rfbsde;

namespace {
SpaceTimeGrid classical_grid(std::size_t nt = 400, std::size_t nx = 60) { return {0.0, 1.0, nt, 0.1, 5.0, nx}; }
SpaceTimeGrid viscosity_grid(std::size_t nt = 400, std::size_t nx = 80) { return {0.0, 1.0, nt, -5.0, 5.0, nx}; }
}  // namespace

TEST_CASE("scalar Hamiltonian of the classical example") {
  const auto m = example_classical();
  // 0.5 x^2 P + p (x + u) + y + u
  CHECK(hamiltonian(m, 0.0, 2.0, 3.0, 0.5, 4.0, 1.0) == doctest::Approx(8.0 + 1.5 + 3.0 + 1.0));
  HamiltonianQuery q{0.0, {2.0}, 3.0, {0.5}, {4.0}, {1.0}};
  CHECK(hamiltonian(m, q) == doctest::Approx(13.5));
}

TEST_CASE("grid argmin and canonical tie-break") {
  const auto m = example_classical();
  // coefficient of u is p + 1
  auto r = inf_hamiltonian(m, 0.0, 1.0, 0.0, 2.0, 0.0);
  CHECK(r.canonical[0] == 0.0);
  REQUIRE(r.argmin.size() == 1);
  r = inf_hamiltonian(m, 0.0, 1.0, 0.0, -3.0, 0.0);
  CHECK(r.canonical[0] == 1.0);
  r = inf_hamiltonian(m, 0.0, 1.0, 0.0, -1.0, 0.0);
  CHECK(r.argmin.size() == 11);
  CHECK(r.canonical[0] == 0.0);
  CHECK(r.value == doctest::Approx(-1.0));
}

TEST_CASE("non-finite coefficients are reported") {
  auto m = example_classical();
  m.driver = [](double, std::span<const double>, double, std::span<const double>, std::span<const double>) {
    return std::nan("");
  };
  CHECK_THROWS_AS(hamiltonian(m, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0), NumericalError);
}

TEST_CASE("explicit scheme reproduces the classical closed form") {
  const auto m = example_classical();
  const auto g = classical_grid();
  const auto w = solve_obstacle_hjb(m, g);
  const auto e = compare_surfaces(w, candidate_surface("candidate-classical", g, 1.0), 3);
  CHECK(e.max_relative < 1e-2);
  CHECK(w.substeps >= 1);
}

TEST_CASE("every boundary rule and the implicit scheme stay close") {
  const auto m = example_classical();
  const auto g = classical_grid();
  const auto ref = candidate_surface("candidate-classical", g, 1.0);
  for (auto rule : {BoundaryRule::linear_extrapolation, BoundaryRule::one_sided_pde}) {
    HjbConfig c;
    c.boundary = rule;
    CHECK(compare_surfaces(solve_obstacle_hjb(m, g, c), ref, 3).max_relative < 2e-2);
  }
  HjbConfig pi;
  pi.scheme = HjbScheme::policy_iteration;
  const auto g2 = classical_grid(200);
  CHECK(compare_surfaces(solve_obstacle_hjb(m, g2, pi), candidate_surface("candidate-classical", g2, 1.0), 3).max_relative <
        2e-2);
}

TEST_CASE("viscosity example away from the kink") {
  const auto m = example_viscosity();
  const auto g = viscosity_grid();
  HjbConfig c;
  c.kinks = {0.0};
  const auto w = solve_obstacle_hjb(m, g, c);
  const auto e = compare_surfaces(w, candidate_surface("candidate-viscosity", g, 1.0), 3, 3.0 * g.dx());
  CHECK(e.max_relative < 2e-2);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) CHECK(w.at(i, j) <= m.h(g.t(i), g.x(j)) + 1e-12);
}

TEST_CASE("penalty variant approaches the projection") {
  const auto m = example_viscosity();
  const auto g = viscosity_grid(200, 40);
  const auto proj = solve_obstacle_hjb(m, g);
  HjbConfig c;
  c.penalty = 1e6;
  const auto pen = solve_obstacle_hjb(m, g, c);
  double diff = 0.0;
  for (std::size_t k = 0; k < proj.values().size(); ++k)
    diff = std::max(diff, std::fabs(proj.values()[k] - pen.values()[k]));
  CHECK(diff < 1e-3);
}

TEST_CASE("fixed substeps violating CFL are rejected with the required step") {
  HjbConfig c;
  c.substeps = 1;
  try {
    solve_obstacle_hjb(example_classical(), {0.0, 1.0, 50, 0.1, 5.0, 100}, c);
    FAIL("expected CFL error");
  } catch (const ConfigError& e) {
    CHECK(e.code() == "E_HJB_CFL");
    CHECK(std::string(e.what()).find("required dt") != std::string::npos);
  }
}

TEST_CASE("residual vanishes on the classical candidate") {
  const auto m = example_classical();
  const auto g = classical_grid(2000, 100);
  const auto r = residual(candidate_surface("candidate-classical", g, 1.0), m);
  // forward difference in t dominates: O(dt) relative to W_t ~ 2 e^2 x
  CHECK(r.max_abs(3) < 0.05);
  CHECK(std::isnan(r.values[0]));
}

TEST_CASE("surface CSV round trip keeps every bit") {
  const auto g = viscosity_grid(10, 10);
  auto w = candidate_surface("candidate-viscosity", g, 1.0);
  std::stringstream ss;
  write_surface_csv(ss, w);
  const auto back = read_surface_csv(ss);
  CHECK(back.values() == w.values());
  CHECK(back.kinks() == w.kinks());
  CHECK(back.grid() == g);
}

TEST_CASE("derivative accessor refuses kink columns") {
  const auto g = viscosity_grid(10, 10);
  const auto w = candidate_surface("candidate-viscosity", g, 1.0);
  CHECK(w.is_kink_column(5));
  CHECK_FALSE(w.is_kink_column(3));
  CHECK_THROWS_AS(w.derivatives(2, 5), ConfigError);
  const auto [left, right] = w.one_sided_slopes(2, 5);
  CHECK(left > right);  // concave kink
  CHECK(w.wx(2, 8) == doctest::Approx(1.0));
}

TEST_CASE("unknown candidate name") {
  CHECK_THROWS_AS(candidate_surface("nope", viscosity_grid(4, 4), 1.0), ConfigError);
}
