#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "blsim/driver.hpp"
#include "blsim/errors.hpp"

using namespace blsim;

namespace {

RunConfig base(double tau) {
  RunConfig c;
  c.nx = 12;
  c.T = 0.1;
  c.fluid.tau = tau;
  return c;
}

void check_report(const EnergyReport& r) {
  REQUIRE_FALSE(r.rows.empty());
  double last_t = -1.0;
  for (const EnergyRow& row : r.rows) {
    CHECK(row.t > last_t);
    last_t = row.t;
    for (double x : {row.sqrt_tau_v_L2, row.v_L2V1_running, row.eps_gradu_running, row.vneg1_proxy}) {
      CHECK(std::isfinite(x));
      CHECK(x >= 0.0);
    }
    CHECK(row.min_u >= 0.0);
    CHECK(row.max_u <= 1.0);
  }
}

struct Counter : StepObserver {
  int begun = 0, steps = 0, ended = 0;
  double last_t = 0.0;
  void begin(const StaggeredGrid&, std::span<const double>, double) override { ++begun; }
  void step(const StepView& s) override {
    CHECK(s.t_old == doctest::Approx(last_t));
    last_t = s.t_new;
    ++steps;
  }
  void end(std::span<const double>, double) override { ++ended; }
};

}  // namespace

TEST_CASE("quiescent data stays put") {
  for (double tau : {0.0, 1e-2}) {
    RunConfig c = base(tau);
    c.preset = PresetKind::quiescent;
    c.preset_params.initial_u = 0.3;
    c.dt_max = 0.01;
    const Trajectory traj = run(c);
    for (const EnergyRow& row : traj.report.rows) {
      CHECK(row.min_u == doctest::Approx(0.3).epsilon(1e-14));
      CHECK(row.max_u == doctest::Approx(0.3).epsilon(1e-14));
      CHECK(row.sqrt_tau_v_L2 < 1e-12);
    }
    CHECK(traj.snapshots.back().t == doctest::Approx(c.T));
  }
}

TEST_CASE("flood runs satisfy the basic invariants") {
  for (double tau : {0.0, 1e-2}) {
    for (double eps : {0.0, 1e-3}) {
      RunConfig c = base(tau);
      c.transport.epsilon = eps;
      const Trajectory traj = run(c);
      check_report(traj.report);
      CHECK(traj.stats.min_pre_clamp >= -1e-12);
      CHECK(traj.stats.max_pre_clamp <= 1.0 + 1e-12);
      CHECK(traj.stats.max_divergence <= 1e-9);
      CHECK(traj.stats.max_conservation_defect < 1e-10);
      CHECK(traj.snapshots.size() == 11);
    }
  }
}

TEST_CASE("observers see every step and replay reproduces them") {
  RunConfig c = base(0.0);
  c.dense = true;
  Counter live;
  RunHooks hooks;
  hooks.step_observers.push_back(&live);
  const Trajectory traj = run(c, hooks);
  CHECK(live.begun == 1);
  CHECK(live.ended == 1);
  CHECK(live.steps == traj.stats.steps);
  CHECK(static_cast<int>(traj.steps.size()) == traj.stats.steps);
  Counter again;
  replay(traj, again);
  CHECK(again.steps == live.steps);
  CHECK(again.last_t == live.last_t);

  // Streaming and replayed diagnostics agree exactly.
  DiagnosticsObserver a(traj.model, traj.transport, traj.T), b(traj.model, traj.transport, traj.T);
  RunHooks h2;
  h2.step_observers.push_back(&a);
  run(c, h2);
  replay(traj, b);
  const Certificate ca = a.certificate(), cb = b.certificate();
  REQUIRE(ca.rows.size() == cb.rows.size());
  for (std::size_t k = 0; k < ca.rows.size(); ++k) CHECK(ca.rows[k].value == cb.rows[k].value);

  RunConfig sparse = base(0.0);
  Counter none;
  CHECK_THROWS_AS(replay(run(sparse), none), DomainError);
}

struct Saboteur : StepObserver {
  int at = 0, seen = 0;
  void step(const StepView&) override {
    if (++seen == at) throw NumericError("injected");
  }
};

TEST_CASE("a failure during the loop aborts with the partial run") {
  RunConfig c = base(1e-2);
  Saboteur s;
  s.at = 7;
  RunHooks hooks;
  hooks.step_observers.push_back(&s);
  try {
    run(c, hooks);
    FAIL("expected RunAborted");
  } catch (const RunAborted& e) {
    CHECK(e.partial().stats.steps == 6);
    CHECK(e.partial().snapshots.back().t == e.time());
    CHECK(e.time() > 0.0);
    CHECK(std::string(e.what()).find("injected") != std::string::npos);
  }
}

TEST_CASE("a solver that cannot converge is reported") {
  RunConfig c = base(1e-2);
  c.solver.max_iterations = 1;
  c.solver.tolerance = 1e-15;
  CHECK_THROWS_AS(run(c), SolverError);
}

TEST_CASE("max_steps and the split order") {
  RunConfig c = base(0.0);
  c.max_steps = 5;
  const Trajectory traj = run(c);
  CHECK(traj.stats.steps == 5);
  CHECK(traj.snapshots.back().t < c.T);
  RunConfig s = base(1e-2);
  s.order = SplitOrder::saturation_first;
  check_report(run(s).report);
  CHECK(parse_split_order("saturation_first") == SplitOrder::saturation_first);
}

TEST_CASE("configuration validation") {
  RunConfig c = base(0.0);
  CHECK_NOTHROW(c.validate());
  c.T = 0.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = base(0.0);
  c.max_steps = -1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = base(0.0);
  c.fluid.mu1 = -1.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("gradient norm of a ramp") {
  const StaggeredGrid g(4, 4);
  std::vector<double> u(g.cell_count());
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) u[g.cell(i, j)] = g.xc(i);
  CHECK(grad_norm_sq(u, g) == doctest::Approx(0.75));
}

TEST_CASE("line fit") {
  const auto [slope, intercept] = fit_line({1.0, 2.0, 3.0, 4.0}, {3.0, 5.0, 7.0, 9.0});
  CHECK(slope == doctest::Approx(2.0));
  CHECK(intercept == doctest::Approx(1.0));
}

TEST_CASE("small epsilon study") {
  RunConfig c = base(0.0);
  c.nx = 8;
  c.samples = 5;
  const EpsilonStudy s = epsilon_study(c, {1e-2, 5e-3, 2.5e-3});
  REQUIRE(s.rows.size() == 3);
  CHECK(s.rows[0].epsilon == 1e-2);
  CHECK(std::isfinite(s.rows[0].cauchy_L1));
  CHECK(std::isfinite(s.rows[1].cauchy_L1));
  CHECK(std::isnan(s.rows[2].cauchy_L1));
  for (const auto& r : s.rows) {
    CHECK(r.certified);
    check_report(r.report);
  }
}

TEST_CASE("small tau study") {
  RunConfig c = base(1e-2);
  c.nx = 8;
  const TauStudy s = tau_study(c, {1e-1, 1e-2, 1e-3});
  REQUIRE(s.rows.size() == 3);
  REQUIRE(s.slope.has_value());
  CHECK(s.rows[2].D < s.rows[0].D);
  CHECK(*s.slope > 0.0);
  for (const auto& r : s.rows) check_report(r.report);
}
