#pragma once

// Coupled time loop (velocity solve, then saturation step), the energy
// report, and the epsilon / tau parameter studies.

#include <cstdint>
#include <memory>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "blsim/errors.hpp"
#include "blsim/grid.hpp"
#include "blsim/kinetic.hpp"
#include "blsim/model.hpp"
#include "blsim/stokes.hpp"
#include "blsim/trajectory.hpp"
#include "blsim/transport.hpp"

namespace blsim {

enum class SplitOrder { velocity_first, saturation_first };
SplitOrder parse_split_order(std::string_view text);
std::string_view to_string(SplitOrder order);

struct RunConfig {
  int nx = 64;
  int ny = 0;  ///< 0 means ny = nx
  double Lx = 1.0;
  double Ly = 1.0;
  FluidParams fluid;
  RelPermModel relperm;
  FluxMode flux_mode = FluxMode::simple;
  TransportSettings transport;
  SolverSettings solver;

  double T = 0.0;
  double output_interval = 0.0;  ///< 0 means T / 10
  double dt_max = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  bool dense = false;
  int max_steps = 0;  ///< stop after this many steps (0: run to T)
  int picard_iterations = 0;  ///< extra fixed-point sweeps per step (at most 5)
  SplitOrder order = SplitOrder::velocity_first;

  PresetKind preset = PresetKind::flood;
  PresetParams preset_params;
  std::string boundary_csv;
  std::vector<double> boundary_times;

  bool refine_grid = true;  ///< epsilon study: scale the grid with 1/epsilon
  int samples = 20;          ///< epsilon study: time samples for L1(Omega_T)

  void validate() const;
  StaggeredGrid grid() const;
  FluxModel model() const;
  /// Boundary and initial data from the preset (or CSV), mollified if requested.
  ProblemData problem() const;
};

/// A run stopped by a solver or numeric failure. Carries the steps that did
/// complete, with a final snapshot at the last accepted time.
class RunAborted : public NumericError {
public:
  RunAborted(const std::string& what, double t, std::shared_ptr<const Trajectory> partial)
      : NumericError(what), t_(t), partial_(std::move(partial)) {}
  double time() const noexcept { return t_; }
  const Trajectory& partial() const { return *partial_; }

private:
  double t_;
  std::shared_ptr<const Trajectory> partial_;
};

/// Run-time options that are not part of the physical configuration.
struct RunHooks {
  std::vector<StepObserver*> step_observers;
  std::vector<VelocityObserver*> velocity_observers;
  /// Resolve the initial layer of the tau-equation with graded substeps
  /// tau/100 * 1.2^j (capped by the transport step).
  bool graded_initial_layer = true;
};

/// tau > 0: implicit-Euler velocity steps; initial velocity defaults to the
/// Stokes lifting of b(0). Throws SolverError / NumericError / CflError.
Trajectory run_ibvp_tau(const RunConfig& config, const ProblemData& data,
                        const std::optional<VelocityField>& v0 = std::nullopt,
                        const RunHooks& hooks = {});
Trajectory run_ibvp_tau(const RunConfig& config);

/// tau = 0: quasi-stationary Brinkman solve every step.
Trajectory run_ibvp_stationary(const RunConfig& config, const ProblemData& data,
                               const RunHooks& hooks = {});
Trajectory run_ibvp_stationary(const RunConfig& config);

/// Dispatches on config.fluid.tau.
Trajectory run(const RunConfig& config, const RunHooks& hooks = {});

/// Discrete eps |grad u|^2 integrand: sum over interior faces of (du)^2 len/dist.
double grad_norm_sq(std::span<const double> u, const StaggeredGrid& grid);

struct EpsilonStudyRow {
  double epsilon = 0.0;
  int nx = 0;
  int ny = 0;
  bool resolved = true;
  double cauchy_L1 = std::numeric_limits<double>::quiet_NaN();  ///< to the next epsilon
  double eps_gradu = 0.0;
  double sqrt_tau_v_L2 = 0.0;
  double v_L2V1 = 0.0;
  double vneg1_proxy = 0.0;
  double min_u = 0.0;
  double max_u = 0.0;
  double min_m_density = 0.0;
  double min_m_estimate_margin = 0.0;
  bool certified = false;
  int steps = 0;
  EnergyReport report;
};

struct EpsilonStudy {
  std::vector<EpsilonStudyRow> rows;
  std::vector<std::string> warnings;
  bool cauchy_strictly_decreasing = false;
  double last_over_first = std::numeric_limits<double>::quiet_NaN();
};

/// Runs each epsilon (largest first) and reports L1(Omega_T) Cauchy
/// differences between neighbours, sampled at `samples` equispaced times.
EpsilonStudy epsilon_study(const RunConfig& config, const std::vector<double>& epsilons);

struct TauStudyRow {
  double tau = 0.0;
  double D = 0.0;          ///< |v - B|^2 in L2(0,T;H1)
  double B_V1_max = 0.0;   ///< sup_t |B|_{H1}
  double dtB_max = 0.0;    ///< sup_t |dB/dt|_{H1}, finite differences
  double sqrt_tau_v_L2 = 0.0;
  double v_L2V1 = 0.0;
  double vneg1_proxy = 0.0;
  double eps_gradu = 0.0;
  double min_u = 0.0;
  double max_u = 0.0;
  int steps = 0;
  int velocity_substeps = 0;
  EnergyReport report;
};

struct TauStudy {
  std::vector<TauStudyRow> rows;
  std::vector<std::string> warnings;
  std::optional<double> slope;  ///< least squares in log D vs log tau
  double intercept = 0.0;
  int fit_points = 0;
};

TauStudy tau_study(const RunConfig& config, const std::vector<double>& taus);

/// Least-squares slope and intercept of y against x.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace blsim
