#pragma once

// What a coupled run produces: snapshots at the output cadence, optional
// per-step states, the energy report, and the hooks through which
// diagnostics see every step while it happens.

#include <limits>
#include <span>
#include <vector>

#include "blsim/grid.hpp"
#include "blsim/model.hpp"
#include "blsim/transport.hpp"

namespace blsim {

/// One saturation step as seen by observers. `v` and `b` are the velocity
/// and boundary data the transport step used.
struct StepView {
  int index = 0;
  double t_old = 0.0;
  double t_new = 0.0;
  std::span<const double> u_old;
  std::span<const double> u_new;
  const VelocityField* v = nullptr;
  const BoundarySnapshot* b = nullptr;

  double dt() const { return t_new - t_old; }
};

class StepObserver {
public:
  virtual ~StepObserver() = default;
  virtual void begin(const StaggeredGrid& grid, std::span<const double> u0, double t0) {
    (void)grid, (void)u0, (void)t0;
  }
  virtual void step(const StepView& s) = 0;
  virtual void end(std::span<const double> u_final, double t_final) { (void)u_final, (void)t_final; }
};

/// One implicit-Euler velocity substep (tau > 0) or one quasi-stationary solve.
struct VelocityView {
  double t_old = 0.0;
  double t_new = 0.0;
  const VelocityField* v_old = nullptr;
  const VelocityField* v_new = nullptr;
  std::span<const double> h;  ///< damping used for this solve
  const BoundarySnapshot* b = nullptr;
};

class VelocityObserver {
public:
  virtual ~VelocityObserver() = default;
  virtual void substep(const VelocityView& s) = 0;
};

struct Snapshot {
  double t = 0.0;
  std::vector<double> u;
  VelocityField v;
};

/// Per-step record kept when a run is dense.
struct DenseStep {
  double t_old = 0.0;
  double t_new = 0.0;
  double t_boundary = 0.0;  ///< time at which the transport step read the boundary data
  std::vector<double> u;    ///< state after the step
  std::vector<double> vx;
  std::vector<double> vy;
};

struct EnergyRow {
  double t = 0.0;
  double min_u = 0.0;
  double max_u = 0.0;
  double sqrt_tau_v_L2 = 0.0;     ///< sup over [0, t] of sqrt(tau) |v|_L2
  double v_L2V1_running = 0.0;    ///< |v|_{L2(0,t;H1)}
  double eps_gradu_running = 0.0; ///< eps |grad u|^2_{L2(Omega_t)}
  double vneg1_proxy = 0.0;       ///< tau |dv/dt|_{L2(0,t;V^-1)}, inverse-Laplacian proxy
};

struct EnergyReport {
  std::vector<EnergyRow> rows;
};

struct RunStats {
  int steps = 0;
  int velocity_solves = 0;
  int max_solver_iterations = 0;
  double min_pre_clamp = std::numeric_limits<double>::infinity();
  double max_pre_clamp = -std::numeric_limits<double>::infinity();
  double max_clamp = 0.0;
  double max_divergence = 0.0;  ///< over every velocity solve
  double min_dt = std::numeric_limits<double>::infinity();
  double max_dt = 0.0;
  double max_conservation_defect = 0.0;  ///< relative, per step
};

/// One saddle-point iteration of one velocity solve (kept when tracing).
struct SolverTraceEntry {
  int solve = 0;
  int iteration = 0;
  double momentum_residual = 0.0;
  double div_residual = 0.0;
};

struct Trajectory {
  Trajectory(StaggeredGrid g, FluxModel m) : grid(std::move(g)), model(std::move(m)) {}

  StaggeredGrid grid;
  FluxModel model;
  TransportSettings transport;
  double tau = 0.0;
  double T = 0.0;
  BoundaryData boundary;
  std::vector<double> u0;
  std::vector<Snapshot> snapshots;
  bool dense = false;
  std::vector<DenseStep> steps;
  EnergyReport report;
  RunStats stats;
  std::vector<SolverTraceEntry> solver_trace;
};

/// Feeds the stored steps of a dense trajectory to an observer. Throws
/// DomainError when the trajectory is not dense.
void replay(const Trajectory& traj, StepObserver& observer);

}  // namespace blsim
