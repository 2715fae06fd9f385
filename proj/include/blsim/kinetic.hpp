#pragma once

// Kinetic representation f = sgn+(u - v) of a discrete trajectory and the
// checks built on it: indicator structure, entropy defect measures m+ / m-
// computed from the scheme's own entropy fluxes, the m-estimate, boundary
// measures, and the weak entropy inequality against hat test functions.

#include <optional>
#include <string>
#include <vector>

#include "blsim/grid.hpp"
#include "blsim/model.hpp"
#include "blsim/trajectory.hpp"
#include "blsim/transport.hpp"

namespace blsim {

struct VGrid {
  std::vector<double> v;

  /// -delta, then `points` equispaced values on [0, 1], then 1 + delta.
  static VGrid standard(int points = 21, double delta = 0.05);
  /// Largest gap between neighbours.
  double spacing() const;
  void validate() const;
};

struct CertificateRow {
  std::string name;
  double v = 0.0;
  double value = 0.0;
  double bound = 0.0;
  bool pass = true;
  std::string detail;
};

struct Certificate {
  std::vector<CertificateRow> rows;

  void add(std::string name, double v, double value, double bound, bool pass,
           std::string detail = {});
  void append(const Certificate& other);
  bool ok() const;
  const CertificateRow* first_failure() const;
};

/// f(level, cell, j) for the snapshot levels of a trajectory, with the
/// first-layer boundary trace fb(level, face, j).
struct KineticField {
  std::vector<double> times;
  std::vector<double> vgrid;
  int cells = 0;
  int faces = 0;
  std::vector<double> u;   ///< (level, cell)
  std::vector<double> f;   ///< (level, cell, j)
  std::vector<double> fb;  ///< (level, face, j)

  int levels() const { return static_cast<int>(times.size()); }
  int nv() const { return static_cast<int>(vgrid.size()); }
  double& at(int level, int cell, int j) {
    return f[(static_cast<std::size_t>(level) * cells + cell) * vgrid.size() + j];
  }
  double at(int level, int cell, int j) const {
    return f[(static_cast<std::size_t>(level) * cells + cell) * vgrid.size() + j];
  }
  /// Trace at t = 0 is level 0.
  double f0(int cell, int j) const { return at(0, cell, j); }
};

KineticField build_kinetic(const Trajectory& traj, const VGrid& vgrid);
KineticField build_kinetic(const StaggeredGrid& grid, const std::vector<double>& times,
                           const std::vector<std::vector<double>>& levels, const VGrid& vgrid);

/// f in {0,1}, nonincreasing in v, support conditions, z-reconstruction and
/// the layer-cake identities for G(u) = u and G(u) = u^2.
Certificate indicator_certificate(const KineticField& kf);

/// max(1, K max|v| / min(dx, dy) + 2 eps (1/dx^2 + 1/dy^2)).
double scheme_scale(const StaggeredGrid& grid, const FluxModel& model, double epsilon,
                    double vmax);

/// Entropy defect for one Kruzhkov level v.
struct DefectMeasure {
  double v = 0.0;
  double min_plus_density = 0.0;   ///< min over (step, cell) of m+ / (area dt)
  double min_minus_density = 0.0;
  double plus_mass = 0.0;          ///< total m+ over Omega_T
  double minus_mass = 0.0;
  double rhs_plus = 0.0;           ///< int |u0 - v|+ + int_{Gamma_T} M |u_b - v|+
  double rhs_minus = 0.0;
  std::vector<double> plus_cells;  ///< time-integrated m+ per cell (optional)
  std::vector<double> minus_cells;
};

struct MEstimateResult {
  double lhs_plus = 0.0, rhs_plus = 0.0, margin_plus = 0.0;
  double lhs_minus = 0.0, rhs_minus = 0.0, margin_minus = 0.0;
  bool pass = false;
};

MEstimateResult m_estimate_check(const DefectMeasure& measure);

/// Streams the cellwise entropy balance of every step for each level of the
/// v-grid: m+- := -(area (eta(u_new) - eta(u_old)) + dt sum_faces Q+-).
class EntropyAccumulator : public StepObserver {
public:
  EntropyAccumulator(FluxModel model, TransportSettings settings, std::vector<double> levels,
                     bool keep_cells = false);

  void begin(const StaggeredGrid& grid, std::span<const double> u0, double t0) override;
  void step(const StepView& s) override;
  void end(std::span<const double> u_final, double t_final) override;

  const std::vector<DefectMeasure>& measures() const { return measures_; }
  double scheme_scale() const { return scale_; }
  int steps() const { return steps_; }

  /// Sum_j w_j psi'(v_j) m+(v_j) against the kinetic balance of Psi(u) = int psi,
  /// psi a Gaussian bump on [0, 1]. Returns (lhs, rhs).
  std::pair<double, double> v_balance() const;

private:
  FluxModel model_;
  TransportSettings settings_;
  std::vector<double> levels_;
  bool keep_cells_;
  std::optional<StaggeredGrid> grid_;
  std::vector<DefectMeasure> measures_;
  double scale_ = 1.0;
  int steps_ = 0;
  double psi_initial_ = 0.0, psi_final_ = 0.0;
  std::vector<double> kinetic_boundary_;  // per level: sum dt len b_n fb(v)
  std::vector<double> robin_boundary_;    // per level: sum dt len M ((u_in-v)+ - (u_b-v)+)
};

DefectMeasure entropy_production(const Trajectory& traj, double v);

/// Tensor-product hats phi(t,x,y) = a(t) b(x) c(y); the default family has
/// time centres {0, T/4, T/2, 3T/4} (half width T/4) and space centres
/// {0, L/3, 2L/3, L} (half width L/3), 64 functions in all.
struct HatFamily {
  std::vector<double> t_centres, x_centres, y_centres;
  double t_half = 0.0, x_half = 0.0, y_half = 0.0;
  std::vector<double> weights;  ///< per function, all >= 0; empty means 1

  static HatFamily standard(double T, double Lx, double Ly);
  int size() const {
    return static_cast<int>(t_centres.size() * x_centres.size() * y_centres.size());
  }
  void validate(double T) const;
};

struct WeakResidual {
  double v = 0.0;
  double min_residual = 0.0;
  int argmin = -1;
  std::vector<double> residuals;  ///< per test function
};

/// Left side of the weak entropy inequality
///   int int |u-v| phi_t + sgn(u-v)(g(u)-g(v)) vel . grad phi
///   + int_Gamma M |u_b - v| phi + int |u0 - v| phi(0) >= 0
/// by midpoint quadrature along the stored steps.
class WeakResidualAccumulator : public StepObserver {
public:
  WeakResidualAccumulator(FluxModel model, std::vector<double> levels, HatFamily family, double T);

  void begin(const StaggeredGrid& grid, std::span<const double> u0, double t0) override;
  void step(const StepView& s) override;

  const std::vector<WeakResidual>& residuals() const { return results_; }
  double min_residual() const;
  double max_dt() const { return max_dt_; }

private:
  double hat(double c, double half, double x) const;
  /// Mean of the hat over [a, b].
  double hat_mean(double c, double half, double a, double b) const;
  // sum over cells of w(i,j) b_k(x_i) c_l(y_j), all (k, l)
  void contract(const std::vector<double>& w, const std::vector<double>& bx,
                const std::vector<double>& cy, std::vector<double>& out) const;

  FluxModel model_;
  std::vector<double> levels_;
  HatFamily family_;
  double T_;
  std::optional<StaggeredGrid> grid_;
  std::vector<double> X_, DX_, Y_, DY_;  // (k, i) and (l, j) tables
  std::vector<WeakResidual> results_;
  double max_dt_ = 0.0;
};

WeakResidual weak_solution_residual(const Trajectory& traj, double v, const HatFamily& family);

struct BoundaryMeasureSummary {
  double min_plus = 0.0;   ///< min of m+^b over faces, steps, levels
  double min_minus = 0.0;
  double support_plus = 0.0;   ///< max |m+^b| over levels v >= 1
  double support_minus = 0.0;  ///< max |m-^b| over levels v <= 0
  long inflow_pairs = 0;       ///< (face, step, level) with g'(v) b_n < 0, second half of the run
  long inflow_mismatch = 0;    ///< of those, first-layer fb != sgn+(u_b - v)
};

/// m+^b = int_v^1 g'(s) b_n fb ds + M |u_b - v|+ and
/// m-^b = int_0^v g'(s) b_n (1 - fb) ds + M |u_b - v|-, with fb the state the
/// boundary flux upwinds from (u_b at inflow faces, the adjacent cell otherwise).
class BoundaryMeasureAccumulator : public StepObserver {
public:
  /// Inflow levels are compared against the first-layer value once their
  /// characteristic has crossed 2 cells plus 4 eps/|v.n| of boundary layer.
  BoundaryMeasureAccumulator(FluxModel model, std::vector<double> levels, double T,
                             double epsilon = 0.0);
  void begin(const StaggeredGrid& grid, std::span<const double> u0, double t0) override;
  void step(const StepView& s) override;
  const BoundaryMeasureSummary& summary() const { return summary_; }

private:
  FluxModel model_;
  std::vector<double> levels_;
  double T_;
  double epsilon_;
  std::optional<StaggeredGrid> grid_;
  BoundaryMeasureSummary summary_;
};

/// All streaming diagnostics of one run.
class DiagnosticsObserver : public StepObserver {
public:
  DiagnosticsObserver(const FluxModel& model, const TransportSettings& settings, double T,
                      VGrid vgrid = VGrid::standard(), bool keep_cells = false);

  void begin(const StaggeredGrid& grid, std::span<const double> u0, double t0) override;
  void step(const StepView& s) override;
  void end(std::span<const double> u_final, double t_final) override;

  const EntropyAccumulator& entropy() const { return entropy_; }
  const WeakResidualAccumulator& weak() const { return weak_; }
  const BoundaryMeasureAccumulator& boundary() const { return boundary_; }

  /// Positivity, support, m-estimate, boundary measures, weak inequality and
  /// the v-differentiated balance.
  Certificate certificate() const;

private:
  VGrid vgrid_;
  FluxModel model_;
  TransportSettings settings_;
  std::optional<StaggeredGrid> grid_;
  EntropyAccumulator entropy_;
  WeakResidualAccumulator weak_;
  BoundaryMeasureAccumulator boundary_;
};

/// Full certificate of a dense trajectory (streaming checks plus the
/// indicator certificate of its snapshots).
Certificate certify_trajectory(const Trajectory& traj, const VGrid& vgrid = VGrid::standard());

}  // namespace blsim
