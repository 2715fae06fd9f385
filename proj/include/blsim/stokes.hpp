#pragma once

// Velocity subproblems on the MAC grid: steady Stokes lifting, quasi-stationary
// Brinkman with damping h(u), and implicit-Euler steps of the time-delayed
// Brinkman equation. All three share one saddle-point solver: the velocity
// blocks are factorized directly and the pressure is found by a
// Cahouet-Chabard preconditioned Uzawa iteration on the Schur complement.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "blsim/grid.hpp"

namespace blsim {

struct SolverSettings {
  int max_iterations = 500;
  double tolerance = 1e-10;  ///< discrete L2 (and max) divergence residual
  /// Fixed Uzawa relaxation; empty selects the conjugate-gradient variant.
  std::optional<double> uzawa_step;
  bool trace = false;

  void validate() const;
};

struct SolverTraceRow {
  int iteration = 0;
  double momentum_residual = 0.0;
  double div_residual = 0.0;
};

struct SolveStats {
  int iterations = 0;
  double momentum_residual = 0.0;
  double div_residual = 0.0;  ///< discrete L2
  double max_div = 0.0;
  std::vector<SolverTraceRow> trace;
};

/// Body force on faces (only interior faces are used). Exists for
/// manufactured-solution checks; the physical system has none.
struct FaceForcing {
  std::vector<double> fx;
  std::vector<double> fy;
};

struct LiftingResult {
  VelocityField v;
  double estimate_ratio = 0.0;  ///< |v|_{H1} / |b|_boundary
};

struct EnergyBalance {
  double dissipation = 0.0;    ///< nu |grad v|^2 + sum c v^2
  double boundary_work = 0.0;  ///< work of the boundary data (plus forcing)
};

/// Owns the grid-dependent factorizations; one instance per grid and nu.
/// Not thread-safe; distinct instances are independent.
class StokesBrinkman {
public:
  StokesBrinkman(const StaggeredGrid& grid, double nu, SolverSettings settings = {});
  ~StokesBrinkman();
  StokesBrinkman(StokesBrinkman&&) noexcept;
  StokesBrinkman& operator=(StokesBrinkman&&) noexcept;

  /// -nu Lap v = -grad p, div v = 0, v = b on the boundary.
  LiftingResult solve_lifting(const BoundarySnapshot& b, SolveStats* stats = nullptr);

  /// -nu Lap v + h v = -grad p + forcing, div v = 0, v = b.
  VelocityField solve_quasi_stationary(std::span<const double> h_cells, const BoundarySnapshot& b,
                                       const FaceForcing* forcing = nullptr,
                                       SolveStats* stats = nullptr,
                                       const std::vector<double>* pressure_guess = nullptr);

  /// (tau/dt)(v - v_prev) - nu Lap v + h v = -grad p, div v = 0, v = b_next.
  VelocityField step_unsteady(const VelocityField& v_prev, std::span<const double> h_cells,
                              const BoundarySnapshot& b_next, double tau, double dt,
                              SolveStats* stats = nullptr);

  /// Quasi-stationary system driven by the saturation of a tau-run.
  VelocityField solve_B_tau(std::span<const double> h_cells, const BoundarySnapshot& b,
                            SolveStats* stats = nullptr) {
    return solve_quasi_stationary(h_cells, b, nullptr, stats);
  }

  /// Most general entry: damping c = h_face + sigma on interior faces.
  VelocityField solve(std::span<const double> h_cells, double sigma, const BoundarySnapshot& b,
                      const FaceForcing* forcing, SolveStats* stats,
                      const std::vector<double>* pressure_guess);

  /// Both sides of the discrete energy identity for a solution of solve().
  EnergyBalance energy_balance(const VelocityField& v, std::span<const double> h_cells,
                               double sigma, const FaceForcing* forcing) const;

  /// Proxy for the V^{-1} norm: sqrt(<(-Lap)^{-1} w, w>) over interior faces.
  double dual_norm_proxy(const VelocityField& w);

  const StaggeredGrid& grid() const;
  double nu() const;
  const SolverSettings& settings() const;

private:
  VelocityField solve_with_extra(std::span<const double> h_cells, double sigma,
                                 const BoundarySnapshot& b, const FaceForcing* forcing,
                                 const std::vector<double>* extra_x,
                                 const std::vector<double>* extra_y, SolveStats* stats,
                                 const std::vector<double>* pressure_guess);

  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Discrete L2(Gamma) norm plus the along-boundary H1 seminorm of b.
double boundary_norm(const BoundarySnapshot& b, const StaggeredGrid& grid);

/// Bilinear Dirichlet form matching the MAC viscous operator (nu = 1).
double dirichlet_form(const VelocityField& a, const VelocityField& b, const StaggeredGrid& grid);

// Free-function forms; each builds a temporary solver.
LiftingResult solve_lifting(const StaggeredGrid& grid, const BoundarySnapshot& b, double nu,
                            const SolverSettings& settings);
VelocityField solve_quasi_stationary(const StaggeredGrid& grid, std::span<const double> h_cells,
                                     const BoundarySnapshot& b, double nu,
                                     const FaceForcing* forcing, const SolverSettings& settings);
VelocityField step_unsteady(const VelocityField& v_prev, const StaggeredGrid& grid,
                            std::span<const double> h_cells, const BoundarySnapshot& b_next,
                            double nu, double tau, double dt, const SolverSettings& settings);
VelocityField solve_B_tau(const StaggeredGrid& grid, std::span<const double> h_cells,
                          const BoundarySnapshot& b, double nu, const SolverSettings& settings);

/// Manufactured Brinkman solution on the unit square: w = curl of
/// sin(pi x) sin(pi y) / pi, p* = cos(pi x) cos(pi y), h = 1, with the
/// matching forcing and boundary trace.
struct MmsResult {
  int nx = 0;
  double velocity_l2_error = 0.0;
  double pressure_l2_error = 0.0;  ///< after removing the mean of p*
  SolveStats stats;
};

MmsResult manufactured_error(int nx, double nu = 0.01,
                             const SolverSettings& settings = SolverSettings{});

}  // namespace blsim
