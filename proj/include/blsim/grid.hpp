#pragma once

// Rectangular MAC grid, field containers, boundary/initial data and the
// discrete norms shared by every estimate check.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace blsim {

enum class Side { bottom, right, top, left };

/// One boundary face of the rectangle.
struct BoundaryFace {
  Side side;
  int along = 0;        ///< index along the side (i for bottom/top, j for left/right)
  double length = 0.0;
  double normal_x = 0.0;  ///< outward unit normal
  double normal_y = 0.0;
  double x = 0.0;       ///< face midpoint
  double y = 0.0;
  int cell = 0;         ///< adjacent interior cell
  int face = 0;         ///< index into vx (left/right) or vy (bottom/top)
};

/// Staggered grid on [0, Lx] x [0, Ly]: saturation and pressure at cell
/// centres, vx on x-faces, vy on y-faces. Fields are stored row-major with
/// y outer and x inner. ny == 1 is the one-dimensional slice mode.
class StaggeredGrid {
public:
  StaggeredGrid(int nx, int ny, double Lx = 1.0, double Ly = 1.0);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double Lx() const { return Lx_; }
  double Ly() const { return Ly_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double cell_area() const { return dx_ * dy_; }
  bool slice_mode() const { return ny_ == 1; }

  int cell_count() const { return nx_ * ny_; }
  int xface_count() const { return (nx_ + 1) * ny_; }
  int yface_count() const { return nx_ * (ny_ + 1); }
  int boundary_count() const { return static_cast<int>(boundary_.size()); }

  int cell(int i, int j) const { return j * nx_ + i; }
  int xface(int i, int j) const { return j * (nx_ + 1) + i; }
  int yface(int i, int j) const { return j * nx_ + i; }

  double xc(int i) const { return (i + 0.5) * dx_; }
  double yc(int j) const { return (j + 0.5) * dy_; }

  /// Boundary faces ordered bottom (left to right), right (bottom to top),
  /// top (left to right), left (bottom to top).
  const std::vector<BoundaryFace>& boundary() const { return boundary_; }
  int boundary_index(Side side, int along) const;

  double perimeter() const { return 2.0 * (Lx_ + Ly_); }

  bool operator==(const StaggeredGrid& other) const {
    return nx_ == other.nx_ && ny_ == other.ny_ && Lx_ == other.Lx_ && Ly_ == other.Ly_;
  }

private:
  int nx_, ny_;
  double Lx_, Ly_, dx_, dy_;
  std::vector<BoundaryFace> boundary_;
};

/// Velocity components on faces, pressure at cell centres and the
/// tangential wall velocity per boundary face (along +x on bottom/top,
/// along +y on left/right). Pressure has zero mean.
struct VelocityField {
  std::vector<double> vx;
  std::vector<double> vy;
  std::vector<double> p;
  std::vector<double> bt;

  static VelocityField zeros(const StaggeredGrid& grid);
  /// Uniform flow (ux, uy) including its wall tangential trace.
  static VelocityField uniform(const StaggeredGrid& grid, double ux, double uy);
};

VelocityField difference(const VelocityField& a, const VelocityField& b);

/// Boundary values at one instant, one entry per boundary face.
struct BoundarySnapshot {
  std::vector<double> u_b;
  std::vector<double> b_n;
  std::vector<double> b_t;
};

/// Piecewise-linear-in-time boundary data on levels t_0 < ... < t_N.
struct BoundaryData {
  std::vector<double> times;
  std::vector<BoundarySnapshot> levels;

  BoundarySnapshot at(double t) const;
  bool time_independent() const;
  static BoundaryData constant(BoundarySnapshot snapshot);
};

struct InitialData {
  std::vector<double> u0;
  std::optional<VelocityField> v0;  ///< required only when tau > 0
};

struct ValidationCheck {
  std::string name;
  bool pass = true;
  double value = 0.0;
  double bound = 0.0;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool ok() const;
  std::string summary() const;
};

/// Checks data bounds, zero net boundary flux per level, and (tau > 0) the
/// divergence and normal trace of v0. Throws DomainError on shape mismatch.
/// `divergence_tolerance` is the largest admissible cell divergence of v0.
ValidationReport validate_data(const StaggeredGrid& grid, const BoundaryData& boundary,
                               const InitialData& init, double tau,
                               double divergence_tolerance = 1e-9);

/// Per cell (vx_E - vx_W)/dx + (vy_N - vy_S)/dy.
std::vector<double> discrete_divergence(const VelocityField& v, const StaggeredGrid& grid);

enum class NormKind { L1, L2, H1_semi, Linf };
NormKind parse_norm_kind(std::string_view text);

/// Midpoint-rule norm of a cell-centred field. Fixed summation order.
double norm(std::span<const double> field, const StaggeredGrid& grid, NormKind kind);

/// Discrete L2 norm of a face field (boundary faces carry half weight).
double velocity_l2(const VelocityField& v, const StaggeredGrid& grid);
/// Discrete Dirichlet seminorm matching the MAC viscous operator, walls included.
double velocity_h1_semi(const VelocityField& v, const StaggeredGrid& grid);
double velocity_h1(const VelocityField& v, const StaggeredGrid& grid);
double max_abs(std::span<const double> values);

/// Tangential wall velocity at the vertex between boundary faces along-1 and along.
double wall_vertex_value(const StaggeredGrid& grid, std::span<const double> bt, Side side,
                         int along);

enum class PresetKind { flood, lid_driven, quiescent, uniform, random };
PresetKind parse_preset(std::string_view text);
std::string_view to_string(PresetKind kind);

struct PresetParams {
  double initial_u = 0.0;  ///< background saturation (quiescent default 0.3)
  double inflow_u = 1.0;
  double speed = 1.0;
  std::uint64_t seed = 0;  ///< random preset only
};

struct ProblemData {
  BoundaryData boundary;
  std::vector<double> u0;
};

/// flood: plug inflow b_n = -speed with u_b = inflow_u on the left, plug
/// outflow on the right, no-slip top and bottom. uniform: the trace of the
/// uniform stream (speed, 0) with the same saturation data. lid_driven:
/// closed box with top wall moving at speed, u0 = 1 on the left half.
/// quiescent: zero velocity data, u0 = u_b = initial_u. random: smooth random
/// b_n (zero net flux), b_t and u_b around the perimeter, u0 uniform in [0, 1]
/// cell by cell, all drawn from `seed`.
ProblemData make_preset(PresetKind kind, const StaggeredGrid& grid, const PresetParams& params);

/// Reads rows "face,level,u_b,b_n,b_t" (header optional) for the given time levels.
BoundaryData load_boundary_csv(const std::string& path, const StaggeredGrid& grid,
                               std::vector<double> times);

}  // namespace blsim
