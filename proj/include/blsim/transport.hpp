#pragma once

// Explicit monotone finite-volume update of the saturation equation
//   du/dt + div(v g(u)) = eps Lap u
// with upwind boundary states (eps = 0) or the Robin condition
//   eps du/dn + M (u - u_b) = 0,  M = K |b_n|   (eps > 0).

#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "blsim/grid.hpp"
#include "blsim/model.hpp"

namespace blsim {

enum class FluxScheme { upwind_monotone, engquist_osher, godunov };
FluxScheme parse_flux_scheme(std::string_view text);
std::string_view to_string(FluxScheme scheme);

struct TransportSettings {
  double epsilon = 0.0;
  double cfl = 0.5;
  FluxScheme scheme = FluxScheme::upwind_monotone;
  bool mollify_data = false;

  void validate() const;
};

/// cfl * min(dx/(K max|vx|), dy/(K max|vy|), min(dx,dy)^2/(4 eps)).
/// Returns dt_max when nothing moves and eps = 0.
double stable_dt(const VelocityField& v, const FluxModel& model, const TransportSettings& settings,
                 const StaggeredGrid& grid,
                 double dt_max = std::numeric_limits<double>::infinity());

/// Largest dt for which every cell update is a monotone (convex) combination.
double monotone_dt_bound(const VelocityField& v, const BoundarySnapshot& b,
                         const FluxModel& model, const TransportSettings& settings,
                         const StaggeredGrid& grid);

/// Advective numerical flux of s -> v_n g(s) across a face, v_n along the face normal
/// pointing from L to R. Upwinding with a non-monotone g falls back to Engquist-Osher.
double face_flux(double u_left, double u_right, double v_n, const FluxModel& model,
                 FluxScheme scheme);

/// Advective plus diffusive flux from L to R across an interior face whose
/// cell centres are `distance` apart.
double interior_flux(double u_left, double u_right, double v_n, double distance,
                     const FluxModel& model, const TransportSettings& settings);

/// Outward flux through a boundary face: upwind advective part and, for
/// eps > 0 at outflow faces, the Robin term M (u_in - u_b).
double boundary_flux(double u_in, double u_b, double v_out, double M, const FluxModel& model,
                     const TransportSettings& settings);

/// Robin coefficient M = K |b_n|.
inline double robin_coefficient(const FluxModel& model, double b_n) {
  return model.K() * (b_n < 0.0 ? -b_n : b_n);
}

/// Outward normal velocity on boundary face k.
double outward_velocity(const VelocityField& v, const StaggeredGrid& grid, int k);

struct StepStats {
  double pre_clamp_min = 0.0;
  double pre_clamp_max = 0.0;
  double clamp_magnitude = 0.0;
  double boundary_advective_flux = 0.0;  ///< sum of outward flux * face length
  double boundary_diffusive_flux = 0.0;
  double dt_bound = 0.0;
};

/// One explicit Euler step. Throws CflError when dt exceeds the monotone
/// bound and NumericError (naming the cell) on a non-finite value.
std::vector<double> step_saturation(std::span<const double> u, const VelocityField& v,
                                    const BoundarySnapshot& b, const FluxModel& model,
                                    const TransportSettings& settings, double dt,
                                    const StaggeredGrid& grid, StepStats* stats = nullptr);

/// Hat-kernel average of radius two cells (renormalized at the walls).
std::vector<double> mollify_cells(std::span<const double> u, const StaggeredGrid& grid);
/// The same smoothing of u_b along each side of the rectangle.
BoundarySnapshot mollify_boundary(const BoundarySnapshot& b, const StaggeredGrid& grid);

/// Entropy solution of the 1-D Riemann problem for du/dt + (g(u))_x = 0 with u_L >= u_R,
/// built from the upper concave hull of g (shock from the tangent point, then rarefaction).
class RiemannSolution {
public:
  RiemannSolution(const FluxModel& model, double u_left, double u_right);

  double u_star() const { return u_star_; }
  double shock_speed() const { return shock_speed_; }
  /// |chord slope - g'(u*)| at the returned tangent point.
  double tangency_residual() const { return residual_; }
  bool trivial() const { return u_left_ == u_right_; }

  /// Solution at similarity coordinate xi = x / (t |v|).
  double sample(double xi) const;
  /// State on the rarefaction branch whose characteristic speed is xi.
  double branch_state(double xi) const;
  /// Like branch_state but not stopped at u*: searches the whole concave
  /// part of g between the inflection point and u_L. Used to read the
  /// post-shock state of a computed front from its measured speed.
  double concave_state(double xi) const;

private:
  FluxModel model_;
  double u_left_, u_right_;
  double u_star_ = 0.0;
  double shock_speed_ = 0.0;
  double residual_ = 0.0;
};

RiemannSolution riemann_oracle(const FluxModel& model, double u_left, double u_right);

/// Inflow problem on the slice [0, 1] with unit velocity: u = u_R initially,
/// u_b = u_L on the left. The front position at time s is the centroid of
/// the drops u_i - u_{i+1} within 4 cells of the steepest one; the measured
/// speed comes from the positions at t/2 and t, and the post-shock state is
/// the concave-branch state with that characteristic speed.
struct RiemannRun {
  int nx = 0;
  double t = 0.0;
  double shock_position = 0.0;
  double exact_position = 0.0;
  double measured_speed = 0.0;
  double post_shock_state = 0.0;
  double exact_u_star = 0.0;
  double tangency_residual = 0.0;
  std::vector<double> x, u, u_exact;
};

RiemannRun riemann_run(const FluxModel& model, double u_left, double u_right, int nx, double t,
                       const TransportSettings& settings = TransportSettings{});

}  // namespace blsim
