#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "blsim/errors.hpp"
#include "blsim/grid.hpp"
#include "blsim/model.hpp"
#include "blsim/stokes.hpp"
#include "blsim/transport.hpp"

using namespace blsim;

namespace {

FluxModel corey() { return FluxModel(FluidParams{}, RelPermModel{}, FluxMode::simple); }

FluxModel linear() {
  RelPermModel r;
  r.kind = RelPermKind::linear;
  return FluxModel(FluidParams{}, r, FluxMode::simple);
}

// Advances to time t with the largest admissible step.
std::vector<double> advance(std::vector<double> u, const VelocityField& v, const BoundarySnapshot& b,
                            const FluxModel& m, const TransportSettings& s, const StaggeredGrid& g,
                            double t) {
  double time = 0.0;
  while (time < t - 1e-14) {
    const double dt = std::min(stable_dt(v, m, s, g), t - time);
    u = step_saturation(u, v, b, m, s, dt, g);
    time += dt;
  }
  return u;
}

double total(const std::vector<double>& u, const StaggeredGrid& g) {
  return std::accumulate(u.begin(), u.end(), 0.0) * g.cell_area();
}

}  // namespace

TEST_CASE("face fluxes") {
  const FluxModel m = corey();
  CHECK(face_flux(0.3, 0.9, 2.0, m, FluxScheme::upwind_monotone) == doctest::Approx(2.0 * m.g(0.3)));
  CHECK(face_flux(0.3, 0.9, -2.0, m, FluxScheme::upwind_monotone) == doctest::Approx(-2.0 * m.g(0.9)));
  // Consistency of every scheme.
  for (FluxScheme s : {FluxScheme::upwind_monotone, FluxScheme::engquist_osher, FluxScheme::godunov}) {
    CHECK(face_flux(0.4, 0.4, 1.5, m, s) == doctest::Approx(1.5 * m.g(0.4)));
    CHECK(face_flux(0.4, 0.4, -1.5, m, s) == doctest::Approx(-1.5 * m.g(0.4)));
  }
  CHECK(parse_flux_scheme("godunov") == FluxScheme::godunov);
  CHECK_THROWS_AS(parse_flux_scheme("roe"), DomainError);
}

TEST_CASE("constant states are preserved exactly") {
  const StaggeredGrid g(10, 10);
  PresetParams p;
  p.initial_u = 0.4;
  p.inflow_u = 0.4;
  const ProblemData d = make_preset(PresetKind::uniform, g, p);
  const VelocityField v = VelocityField::uniform(g, 1.0, 0.0);
  const auto u = advance(d.u0, v, d.boundary.levels[0], corey(), TransportSettings{}, g, 0.2);
  for (double x : u) CHECK(x == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("linear advection of an inflow step") {
  const StaggeredGrid g(256, 1);
  const ProblemData d = make_preset(PresetKind::uniform, g, PresetParams{});
  const VelocityField v = VelocityField::uniform(g, 1.0, 0.0);
  const auto u = advance(d.u0, v, d.boundary.levels[0], linear(), TransportSettings{}, g, 0.25);
  double err = 0.0;
  for (int i = 0; i < g.nx(); ++i) err += std::abs(u[i] - (g.xc(i) < 0.25 ? 1.0 : 0.0)) * g.dx();
  CHECK(err <= 0.05);
}

TEST_CASE("maximum principle and conservation in a closed box") {
  const StaggeredGrid g(16, 16);
  const BoundarySnapshot b = make_preset(PresetKind::lid_driven, g, PresetParams{}).boundary.levels[0];
  const VelocityField v = solve_lifting(g, b, 0.05, SolverSettings{}).v;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> u(g.cell_count());
  for (double& x : u) x = unit(rng);
  const double mass0 = total(u, g);
  const FluxModel m = corey();
  for (TransportSettings s : {TransportSettings{}, TransportSettings{1e-3, 0.5}}) {
    std::vector<double> w = u;
    for (int n = 0; n < 20; ++n) {
      StepStats st;
      w = step_saturation(w, v, b, m, s, stable_dt(v, m, s, g), g, &st);
      CHECK(st.pre_clamp_min >= -1e-14);
      CHECK(st.pre_clamp_max <= 1.0 + 1e-14);
    }
    CHECK(total(w, g) == doctest::Approx(mass0).epsilon(1e-12));
  }
}

TEST_CASE("mass changes only through the boundary") {
  const StaggeredGrid g(12, 12);
  const ProblemData d = make_preset(PresetKind::flood, g, PresetParams{});
  const BoundarySnapshot& b = d.boundary.levels[0];
  std::vector<double> h(g.cell_count(), 1.0);
  const VelocityField v = solve_quasi_stationary(g, h, b, 0.01, nullptr, SolverSettings{});
  const FluxModel m = corey();
  for (TransportSettings s : {TransportSettings{}, TransportSettings{1e-3, 0.5}}) {
    std::vector<double> u = d.u0;
    for (int n = 0; n < 10; ++n) {
      StepStats st;
      const double dt = stable_dt(v, m, s, g);
      const auto w = step_saturation(u, v, b, m, s, dt, g, &st);
      const double change = total(w, g) - total(u, g);
      CHECK(change == doctest::Approx(-dt * (st.boundary_advective_flux + st.boundary_diffusive_flux))
                          .epsilon(1e-10));
      u = w;
    }
  }
}

TEST_CASE("steps above the monotone bound are refused") {
  const StaggeredGrid g(8, 8);
  const ProblemData d = make_preset(PresetKind::uniform, g, PresetParams{});
  const VelocityField v = VelocityField::uniform(g, 1.0, 0.0);
  const FluxModel m = corey();
  const TransportSettings s;
  const double bound = monotone_dt_bound(v, d.boundary.levels[0], m, s, g);
  CHECK(stable_dt(v, m, s, g) <= bound);
  CHECK(stable_dt(v, m, s, g) == doctest::Approx(0.5 * g.dx() / m.K()));
  CHECK_THROWS_AS(step_saturation(d.u0, v, d.boundary.levels[0], m, s, 1.5 * bound, g), CflError);
  TransportSettings bad;
  bad.epsilon = -1.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("Riemann oracle for the quadratic model") {
  const RiemannSolution r = riemann_oracle(corey(), 1.0, 0.0);
  CHECK(r.u_star() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
  CHECK(r.shock_speed() == doctest::Approx((1.0 + std::sqrt(2.0)) / 2.0).epsilon(1e-10));
  CHECK(r.tangency_residual() < 1e-10);
  CHECK(r.sample(2.0) == 0.0);
  CHECK(r.sample(-0.5) == 1.0);
  // Rarefaction: g'(u) = xi on the fan.
  const FluxModel m = corey();
  const double u = r.sample(1.0);
  CHECK(m.gprime(u) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(u > r.u_star());
  CHECK(r.concave_state(r.shock_speed()) == doctest::Approx(r.u_star()).epsilon(1e-8));
  CHECK(riemann_oracle(m, 0.5, 0.5).trivial());
}

TEST_CASE("computed front tracks the oracle") {
  const RiemannRun run = riemann_run(corey(), 1.0, 0.0, 256, 0.25);
  CHECK(std::abs(run.post_shock_state - run.exact_u_star) < 0.01);
  CHECK(std::abs(run.shock_position - run.exact_position) < 3.0 / 256);
  CHECK(run.u.size() == 256);
}

TEST_CASE("mollifier preserves constants") {
  const StaggeredGrid g(8, 8);
  std::vector<double> u(g.cell_count(), 0.7);
  for (double x : mollify_cells(u, g)) CHECK(x == doctest::Approx(0.7));
}
