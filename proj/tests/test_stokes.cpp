#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "blsim/errors.hpp"
#include "blsim/grid.hpp"
#include "blsim/stokes.hpp"

using namespace blsim;

namespace {

BoundarySnapshot flood(const StaggeredGrid& g) {
  return make_preset(PresetKind::flood, g, PresetParams{}).boundary.levels[0];
}

double max_face_diff(const VelocityField& a, const VelocityField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.vx.size(); ++k) m = std::max(m, std::abs(a.vx[k] - b.vx[k]));
  for (std::size_t k = 0; k < a.vy.size(); ++k) m = std::max(m, std::abs(a.vy[k] - b.vy[k]));
  return m;
}

}  // namespace

TEST_CASE("manufactured solution converges at second order") {
  const MmsResult a = manufactured_error(16);
  const MmsResult b = manufactured_error(32);
  const double rate = std::log2(a.velocity_l2_error / b.velocity_l2_error);
  CHECK(rate > 1.8);
  CHECK(rate < 2.2);
  CHECK(b.pressure_l2_error < a.pressure_l2_error);
  CHECK(b.stats.div_residual <= SolverSettings{}.tolerance);
}

TEST_CASE("uniform stream solves the Brinkman system with linear pressure") {
  const StaggeredGrid g(12, 12);
  const BoundarySnapshot b = make_preset(PresetKind::uniform, g, PresetParams{}).boundary.levels[0];
  std::vector<double> h(g.cell_count(), 2.0);
  StokesBrinkman solver(g, 0.05);
  const VelocityField v = solver.solve_quasi_stationary(h, b);
  CHECK(max_face_diff(v, VelocityField::uniform(g, 1.0, 0.0)) < 1e-8);
  // -dp/dx = h u
  const double slope = (v.p[g.cell(7, 5)] - v.p[g.cell(6, 5)]) / g.dx();
  CHECK(slope == doctest::Approx(-2.0).epsilon(1e-7));
}

TEST_CASE("solutions are discretely divergence free and carry the boundary flux") {
  const StaggeredGrid g(16, 16);
  const BoundarySnapshot b = flood(g);
  std::vector<double> h(g.cell_count());
  for (int c = 0; c < g.cell_count(); ++c) h[c] = 1.0 + 0.5 * std::sin(0.3 * c);
  SolverSettings s;
  s.tolerance = 1e-11;
  StokesBrinkman solver(g, 0.01, s);
  SolveStats stats;
  const VelocityField v = solver.solve_quasi_stationary(h, b, nullptr, &stats);
  CHECK(max_abs(discrete_divergence(v, g)) <= 1e-9);
  CHECK(stats.div_residual <= s.tolerance);
  for (int k = 0; k < g.boundary_count(); ++k) {
    const BoundaryFace& f = g.boundary()[k];
    const double vn = (f.side == Side::left || f.side == Side::right)
                          ? v.vx[f.face] * f.normal_x
                          : v.vy[f.face] * f.normal_y;
    CHECK(vn == doctest::Approx(b.b_n[k]).epsilon(1e-14));
  }
}

TEST_CASE("discrete energy identity holds") {
  const StaggeredGrid g(16, 16);
  const BoundarySnapshot b = make_preset(PresetKind::lid_driven, g, PresetParams{}).boundary.levels[0];
  std::vector<double> h(g.cell_count(), 3.0);
  StokesBrinkman solver(g, 0.1);
  const VelocityField v = solver.solve(h, 0.5, b, nullptr, nullptr, nullptr);
  const EnergyBalance e = solver.energy_balance(v, h, 0.5, nullptr);
  CHECK(e.dissipation > 0.0);
  CHECK(e.dissipation == doctest::Approx(e.boundary_work).epsilon(1e-7));
}

TEST_CASE("lifting minimizes the Dirichlet energy among divergence-free extensions") {
  const StaggeredGrid g(16, 16);
  const BoundarySnapshot b = flood(g);
  StokesBrinkman solver(g, 0.01);
  const LiftingResult l = solver.solve_lifting(b);
  CHECK(std::isfinite(l.estimate_ratio));
  CHECK(l.estimate_ratio > 0.0);
  std::vector<double> h(g.cell_count(), 5.0);
  const VelocityField w = solver.solve_quasi_stationary(h, b);
  CHECK(dirichlet_form(l.v, l.v, g) <= dirichlet_form(w, w, g) + 1e-12);
}

TEST_CASE("steady state is a fixed point of the unsteady step") {
  const StaggeredGrid g(12, 12);
  const BoundarySnapshot b = flood(g);
  std::vector<double> h(g.cell_count(), 2.0);
  StokesBrinkman solver(g, 0.02);
  const VelocityField v = solver.solve_quasi_stationary(h, b);
  const VelocityField w = solver.step_unsteady(v, h, b, 1e-2, 1e-3);
  CHECK(max_face_diff(v, w) < 1e-8);
  // Free function agrees with the member.
  const VelocityField u = solve_quasi_stationary(g, h, b, 0.02, nullptr, SolverSettings{});
  CHECK(max_face_diff(u, v) < 1e-12);
}

TEST_CASE("bad input is rejected") {
  const StaggeredGrid g(8, 8);
  BoundarySnapshot b = flood(g);
  StokesBrinkman solver(g, 0.01);
  std::vector<double> h(g.cell_count(), 1.0);
  b.b_n[g.boundary_index(Side::right, 0)] += 1.0;
  CHECK_THROWS_AS(solver.solve_quasi_stationary(h, b), DomainError);
  b = flood(g);
  h[5] = 0.0;
  CHECK_THROWS_AS(solver.solve_quasi_stationary(h, b), DomainError);
  h[5] = 1.0;
  CHECK_THROWS_AS(solver.step_unsteady(VelocityField::zeros(g), h, b, 0.0, 1e-3), DomainError);
  CHECK_THROWS_AS(StokesBrinkman(g, 0.0), DomainError);
  SolverSettings s;
  s.max_iterations = 0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s.max_iterations = 1;
  s.tolerance = 1e-15;
  StokesBrinkman tight(g, 0.01, s);
  CHECK_THROWS_AS(tight.solve_quasi_stationary(h, b), SolverError);
}
