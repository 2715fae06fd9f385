#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "blsim/driver.hpp"
#include "blsim/errors.hpp"
#include "blsim/kinetic.hpp"

using namespace blsim;

namespace {

RunConfig small_flood(PresetKind preset = PresetKind::flood) {
  RunConfig c;
  c.nx = 16;
  c.T = 0.2;
  c.fluid.tau = 0.0;
  c.dense = true;
  c.preset = preset;
  if (preset == PresetKind::quiescent) c.preset_params.initial_u = 0.3;
  return c;
}

const Trajectory& flood_run() {
  static const Trajectory traj = run(small_flood());
  return traj;
}

}  // namespace

TEST_CASE("standard v-grid") {
  const VGrid g = VGrid::standard(21, 0.05);
  REQUIRE(g.v.size() == 23);
  CHECK(g.v.front() == doctest::Approx(-0.05));
  CHECK(g.v.back() == doctest::Approx(1.05));
  CHECK(g.spacing() == doctest::Approx(0.05));
  VGrid bad{{0.0, 0.5, 0.4}};
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("indicator certificate accepts sgn+ fields and rejects corrupted ones") {
  const StaggeredGrid g(4, 4);
  std::vector<std::vector<double>> levels(2, std::vector<double>(g.cell_count()));
  for (int c = 0; c < g.cell_count(); ++c) {
    levels[0][c] = c / 15.0;
    levels[1][c] = 1.0 - c / 15.0;
  }
  KineticField kf = build_kinetic(g, {0.0, 0.1}, levels, VGrid::standard());
  for (int c = 0; c < g.cell_count(); ++c)
    for (int j = 0; j < kf.nv(); ++j)
      CHECK(kf.at(1, c, j) == sgn_plus(levels[1][c] - kf.vgrid[j]));
  CHECK(indicator_certificate(kf).ok());
  kf.at(1, 5, 7) = 0.5;
  const Certificate bad = indicator_certificate(kf);
  CHECK_FALSE(bad.ok());
  REQUIRE(bad.first_failure() != nullptr);
}

TEST_CASE("certificate of a flood run") {
  const Certificate cert = certify_trajectory(flood_run());
  if (const CertificateRow* f = cert.first_failure()) {
    FAIL_CHECK(f->name << " v=" << f->v << " value=" << f->value << " bound=" << f->bound);
  }
  CHECK(cert.ok());
}

TEST_CASE("defect measures are nonnegative and vanish where the data do") {
  const Trajectory& traj = flood_run();
  // Densities divide by area * dt, which magnifies roundoff by the scheme scale.
  const double tol = 1e-10 * scheme_scale(traj.grid, traj.model, 0.0, 2.0);
  for (double v : {0.2, 0.5, 0.8}) {
    const DefectMeasure m = entropy_production(traj, v);
    CHECK(m.min_plus_density >= -tol);
    CHECK(m.min_minus_density >= -tol);
    CHECK(m_estimate_check(m).pass);
  }
  // u0 = 0 and u_b = 1: no data above v = 1, so the right side vanishes.
  const DefectMeasure top = entropy_production(traj, 1.0);
  CHECK(top.rhs_plus == 0.0);
  CHECK(top.plus_mass == doctest::Approx(0.0).scale(1.0));
  CHECK(m_estimate_check(top).pass);
}

TEST_CASE("boundary measures are supported inside [0, 1]") {
  const Trajectory& traj = flood_run();
  DiagnosticsObserver obs(traj.model, traj.transport, traj.T);
  replay(traj, obs);
  const BoundaryMeasureSummary& b = obs.boundary().summary();
  CHECK(b.min_plus >= -1e-12);
  CHECK(b.min_minus >= -1e-12);
  CHECK(b.support_plus < 1e-12);
  CHECK(b.support_minus < 1e-12);
  CHECK(b.inflow_pairs > 0);
  CHECK(static_cast<double>(b.inflow_mismatch) <= 0.01 * b.inflow_pairs);
}

TEST_CASE("weak entropy residual of a constant state is zero") {
  const Trajectory traj = run(small_flood(PresetKind::quiescent));
  const HatFamily fam = HatFamily::standard(traj.T, 1.0, 1.0);
  CHECK(fam.size() == 64);
  for (double v : {0.1, 0.3, 0.6}) {
    const WeakResidual r = weak_solution_residual(traj, v, fam);
    for (double x : r.residuals) CHECK(std::abs(x) < 1e-12);
  }
}

TEST_CASE("weak residual of a flood run is nonnegative up to discretization") {
  const Trajectory& traj = flood_run();
  const HatFamily fam = HatFamily::standard(traj.T, 1.0, 1.0);
  for (double v : {0.25, 0.5, 0.75}) {
    const WeakResidual r = weak_solution_residual(traj, v, fam);
    CHECK(r.residuals.size() == 64);
    CHECK(r.min_residual > -0.02);
  }
}

TEST_CASE("hat families with negative weights are refused") {
  HatFamily fam = HatFamily::standard(1.0, 1.0, 1.0);
  fam.weights.assign(fam.size(), 1.0);
  CHECK_NOTHROW(fam.validate(1.0));
  fam.weights[3] = -1.0;
  CHECK_THROWS_AS(fam.validate(1.0), DomainError);
}

TEST_CASE("scheme scale") {
  const StaggeredGrid g(10, 20);
  const FluxModel m(FluidParams{}, RelPermModel{}, FluxMode::simple);
  CHECK(scheme_scale(g, m, 0.0, 0.0) == 1.0);
  CHECK(scheme_scale(g, m, 0.0, 1.0) == doctest::Approx(2.0 / 0.05));
  CHECK(scheme_scale(g, m, 1e-3, 1.0) == doctest::Approx(40.0 + 2e-3 * (100.0 + 400.0)));
}
