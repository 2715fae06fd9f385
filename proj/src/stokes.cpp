#include "blsim/stokes.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "blsim/errors.hpp"

namespace blsim {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Ldlt = Eigen::SimplicialLDLT<SpMat>;

double mean(const Vec& v) { return v.size() ? v.sum() / static_cast<double>(v.size()) : 0.0; }

void check_compatible(const BoundarySnapshot& b, const StaggeredGrid& grid) {
  const auto nb = static_cast<std::size_t>(grid.boundary_count());
  if (b.b_n.size() != nb || b.b_t.size() != nb)
    throw DomainError("boundary snapshot does not match the grid");
  double net = 0.0;
  for (std::size_t k = 0; k < nb; ++k) net += b.b_n[k] * grid.boundary()[k].length;
  if (std::abs(net) > 1e-10 * grid.perimeter())
    throw DomainError("boundary data has nonzero net flux " + std::to_string(net));
}

}  // namespace

void SolverSettings::validate() const {
  if (max_iterations < 1) throw DomainError("solver.max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw DomainError("solver.tolerance must be > 0");
  if (uzawa_step && !(*uzawa_step > 0.0)) throw DomainError("solver.uzawa_step must be > 0");
}

struct StokesBrinkman::Impl {
  StaggeredGrid grid;
  double nu;
  SolverSettings settings;
  int nxu = 0, nyu = 0;
  SpMat Kx, Ky;                  // unit viscous operators
  std::vector<int> diag_x, diag_y;  // positions of diagonal entries in valuePtr
  Ldlt ldlt_x, ldlt_y;
  bool analyzed = false;
  Ldlt poisson;                  // pinned D D^T
  std::unique_ptr<Ldlt> unit_x, unit_y;

  Impl(const StaggeredGrid& g, double nu_, SolverSettings s)
      : grid(g), nu(nu_), settings(std::move(s)) {
    const int nx = grid.nx(), ny = grid.ny();
    nxu = (nx - 1) * ny;
    nyu = nx * (ny - 1);
    build_viscous();
    build_poisson();
  }

  int ux(int i, int j) const { return j * (grid.nx() - 1) + (i - 1); }
  int uy(int i, int j) const { return (j - 1) * grid.nx() + i; }

  static std::vector<int> diagonal_positions(const SpMat& m) {
    std::vector<int> pos(static_cast<std::size_t>(m.cols()), -1);
    for (int k = 0; k < m.outerSize(); ++k) {
      for (int p = m.outerIndexPtr()[k]; p < m.outerIndexPtr()[k + 1]; ++p) {
        if (m.innerIndexPtr()[p] == k) pos[k] = p;
      }
    }
    return pos;
  }

  void build_viscous() {
    const int nx = grid.nx(), ny = grid.ny();
    const double ix2 = 1.0 / (grid.dx() * grid.dx());
    const double iy2 = 1.0 / (grid.dy() * grid.dy());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(5 * nxu));
    for (int j = 0; j < ny; ++j) {
      for (int i = 1; i < nx; ++i) {
        const int r = ux(i, j);
        double d = 2.0 * ix2 + 2.0 * iy2;
        if (i - 1 > 0) t.emplace_back(r, ux(i - 1, j), -ix2);
        if (i + 1 < nx) t.emplace_back(r, ux(i + 1, j), -ix2);
        if (j > 0) t.emplace_back(r, ux(i, j - 1), -iy2); else d += iy2;
        if (j + 1 < ny) t.emplace_back(r, ux(i, j + 1), -iy2); else d += iy2;
        t.emplace_back(r, r, d);
      }
    }
    Kx.resize(nxu, nxu);
    Kx.setFromTriplets(t.begin(), t.end());
    Kx.makeCompressed();
    diag_x = diagonal_positions(Kx);

    t.clear();
    for (int j = 1; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int r = uy(i, j);
        double d = 2.0 * ix2 + 2.0 * iy2;
        if (j - 1 > 0) t.emplace_back(r, uy(i, j - 1), -iy2);
        if (j + 1 < ny) t.emplace_back(r, uy(i, j + 1), -iy2);
        if (i > 0) t.emplace_back(r, uy(i - 1, j), -ix2); else d += ix2;
        if (i + 1 < nx) t.emplace_back(r, uy(i + 1, j), -ix2); else d += ix2;
        t.emplace_back(r, r, d);
      }
    }
    Ky.resize(nyu, nyu);
    Ky.setFromTriplets(t.begin(), t.end());
    Ky.makeCompressed();
    diag_y = diagonal_positions(Ky);
  }

  void build_poisson() {
    const int nx = grid.nx(), ny = grid.ny();
    const double ix2 = 1.0 / (grid.dx() * grid.dx());
    const double iy2 = 1.0 / (grid.dy() * grid.dy());
    std::vector<Eigen::Triplet<double>> t;
    auto add_edge = [&](int a, int b, double w) {
      if (a != 0) t.emplace_back(a, a, w);
      if (b != 0) t.emplace_back(b, b, w);
      if (a != 0 && b != 0) {
        t.emplace_back(a, b, -w);
        t.emplace_back(b, a, -w);
      }
    };
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) add_edge(grid.cell(i, j), grid.cell(i + 1, j), ix2);
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) add_edge(grid.cell(i, j), grid.cell(i, j + 1), iy2);
    t.emplace_back(0, 0, 1.0);
    SpMat L(grid.cell_count(), grid.cell_count());
    L.setFromTriplets(t.begin(), t.end());
    poisson.compute(L);
    if (poisson.info() != Eigen::Success) throw NumericError("pressure Poisson factorization failed");
  }

  // Interior-face damping from the cell field plus a uniform shift.
  void face_damping(std::span<const double> h, double sigma, Vec& cx, Vec& cy) const {
    const int nx = grid.nx(), ny = grid.ny();
    cx.resize(nxu);
    cy.resize(nyu);
    for (int j = 0; j < ny; ++j)
      for (int i = 1; i < nx; ++i)
        cx[ux(i, j)] = sigma + (h.empty() ? 0.0 : 0.5 * (h[grid.cell(i - 1, j)] + h[grid.cell(i, j)]));
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        cy[uy(i, j)] = sigma + (h.empty() ? 0.0 : 0.5 * (h[grid.cell(i, j - 1)] + h[grid.cell(i, j)]));
  }

  void factorize(const Vec& cx, const Vec& cy) {
    SpMat Ax = Kx * nu;
    SpMat Ay = Ky * nu;
    for (int k = 0; k < nxu; ++k) Ax.valuePtr()[diag_x[k]] += cx[k];
    for (int k = 0; k < nyu; ++k) Ay.valuePtr()[diag_y[k]] += cy[k];
    if (!analyzed) {
      if (nxu) ldlt_x.analyzePattern(Ax);
      if (nyu) ldlt_y.analyzePattern(Ay);
      analyzed = true;
    }
    if (nxu) ldlt_x.factorize(Ax);
    if (nyu) ldlt_y.factorize(Ay);
    if ((nxu && ldlt_x.info() != Eigen::Success) || (nyu && ldlt_y.info() != Eigen::Success))
      throw NumericError("velocity block factorization failed");
  }

  // Boundary values of vx/vy on normal faces.
  void normal_faces(const BoundarySnapshot& b, std::vector<double>& vx,
                    std::vector<double>& vy) const {
    vx.assign(grid.xface_count(), 0.0);
    vy.assign(grid.yface_count(), 0.0);
    for (int k = 0; k < grid.boundary_count(); ++k) {
      const BoundaryFace& f = grid.boundary()[k];
      const double n = f.normal_x + f.normal_y;  // +-1
      if (f.side == Side::left || f.side == Side::right) vx[f.face] = n * b.b_n[k];
      else vy[f.face] = n * b.b_n[k];
    }
  }

  // Momentum right-hand side from boundary data and interior forcing.
  void momentum_rhs(const BoundarySnapshot& b, const std::vector<double>& vxb,
                    const std::vector<double>& vyb, const FaceForcing* forcing,
                    const std::vector<double>* extra_x, const std::vector<double>* extra_y,
                    Vec& fx, Vec& fy) const {
    const int nx = grid.nx(), ny = grid.ny();
    const double ix2 = 1.0 / (grid.dx() * grid.dx());
    const double iy2 = 1.0 / (grid.dy() * grid.dy());
    fx.setZero(nxu);
    fy.setZero(nyu);
    for (int j = 0; j < ny; ++j) {
      for (int i = 1; i < nx; ++i) {
        const int r = ux(i, j);
        const int face = grid.xface(i, j);
        double v = 0.0;
        if (forcing) v += forcing->fx[face];
        if (extra_x) v += (*extra_x)[face];
        if (i - 1 == 0) v += nu * ix2 * vxb[grid.xface(0, j)];
        if (i + 1 == nx) v += nu * ix2 * vxb[grid.xface(nx, j)];
        if (j == 0) v += 2.0 * nu * iy2 * wall_vertex_value(grid, b.b_t, Side::bottom, i);
        if (j + 1 == ny) v += 2.0 * nu * iy2 * wall_vertex_value(grid, b.b_t, Side::top, i);
        fx[r] = v;
      }
    }
    for (int j = 1; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int r = uy(i, j);
        const int face = grid.yface(i, j);
        double v = 0.0;
        if (forcing) v += forcing->fy[face];
        if (extra_y) v += (*extra_y)[face];
        if (j - 1 == 0) v += nu * iy2 * vyb[grid.yface(i, 0)];
        if (j + 1 == ny) v += nu * iy2 * vyb[grid.yface(i, ny)];
        if (i == 0) v += 2.0 * nu * ix2 * wall_vertex_value(grid, b.b_t, Side::left, j);
        if (i + 1 == nx) v += 2.0 * nu * ix2 * wall_vertex_value(grid, b.b_t, Side::right, j);
        fy[r] = v;
      }
    }
  }

  // Divergence of interior-face unknowns only.
  Vec div_interior(const Vec& ax, const Vec& ay) const {
    const int nx = grid.nx(), ny = grid.ny();
    const double idx = 1.0 / grid.dx(), idy = 1.0 / grid.dy();
    Vec d = Vec::Zero(grid.cell_count());
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        double s = 0.0;
        if (i + 1 < nx) s += ax[ux(i + 1, j)] * idx;
        if (i > 0) s -= ax[ux(i, j)] * idx;
        if (j + 1 < ny) s += ay[uy(i, j + 1)] * idy;
        if (j > 0) s -= ay[uy(i, j)] * idy;
        d[grid.cell(i, j)] = s;
      }
    }
    return d;
  }

  // D^T p on interior faces.
  void div_transpose(const Vec& p, Vec& gx, Vec& gy) const {
    const int nx = grid.nx(), ny = grid.ny();
    const double idx = 1.0 / grid.dx(), idy = 1.0 / grid.dy();
    gx.resize(nxu);
    gy.resize(nyu);
    for (int j = 0; j < ny; ++j)
      for (int i = 1; i < nx; ++i)
        gx[ux(i, j)] = (p[grid.cell(i - 1, j)] - p[grid.cell(i, j)]) * idx;
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        gy[uy(i, j)] = (p[grid.cell(i, j - 1)] - p[grid.cell(i, j)]) * idy;
  }

  void solve_blocks(const Vec& rx, const Vec& ry, Vec& x, Vec& y) const {
    x = nxu ? Vec(ldlt_x.solve(rx)) : Vec();
    y = nyu ? Vec(ldlt_y.solve(ry)) : Vec();
  }

  Vec poisson_solve(Vec r) const {
    r.array() -= mean(r);
    r[0] = 0.0;
    Vec x = poisson.solve(r);
    x.array() -= mean(x);
    return x;
  }

  Vec precondition(const Vec& r, double cbar) const {
    Vec z = nu * r;
    if (cbar > 0.0) z += cbar * poisson_solve(r);
    z.array() -= mean(z);
    return z;
  }

  double l2_cells(const Vec& r) const { return std::sqrt(r.squaredNorm() * grid.cell_area()); }
};

StokesBrinkman::StokesBrinkman(const StaggeredGrid& grid, double nu, SolverSettings settings) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("nu must be > 0");
  settings.validate();
  impl_ = std::make_unique<Impl>(grid, nu, std::move(settings));
}
StokesBrinkman::~StokesBrinkman() = default;
StokesBrinkman::StokesBrinkman(StokesBrinkman&&) noexcept = default;
StokesBrinkman& StokesBrinkman::operator=(StokesBrinkman&&) noexcept = default;

const StaggeredGrid& StokesBrinkman::grid() const { return impl_->grid; }
double StokesBrinkman::nu() const { return impl_->nu; }
const SolverSettings& StokesBrinkman::settings() const { return impl_->settings; }

VelocityField StokesBrinkman::solve(std::span<const double> h_cells, double sigma,
                                    const BoundarySnapshot& b, const FaceForcing* forcing,
                                    SolveStats* stats, const std::vector<double>* pressure_guess) {
  Impl& m = *impl_;
  const StaggeredGrid& g = m.grid;
  check_compatible(b, g);
  if (!h_cells.empty()) {
    if (h_cells.size() != static_cast<std::size_t>(g.cell_count()))
      throw DomainError("damping field does not match the grid");
    for (double v : h_cells)
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("damping field must be positive");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("damping shift must be >= 0");
  if (forcing && (forcing->fx.size() != static_cast<std::size_t>(g.xface_count()) ||
                  forcing->fy.size() != static_cast<std::size_t>(g.yface_count())))
    throw DomainError("forcing does not match the grid");
  return solve_with_extra(h_cells, sigma, b, forcing, nullptr, nullptr, stats, pressure_guess);
}

VelocityField StokesBrinkman::solve_with_extra(std::span<const double> h_cells, double sigma,
                                               const BoundarySnapshot& b,
                                               const FaceForcing* forcing,
                                               const std::vector<double>* extra_x,
                                               const std::vector<double>* extra_y,
                                               SolveStats* stats,
                                               const std::vector<double>* pressure_guess) {
  Impl& m = *impl_;
  const StaggeredGrid& g = m.grid;
  const SolverSettings& s = m.settings;

  Vec cx, cy;
  m.face_damping(h_cells, sigma, cx, cy);
  m.factorize(cx, cy);
  double cbar = 0.0;
  if (m.nxu + m.nyu > 0) cbar = (cx.sum() + cy.sum()) / static_cast<double>(m.nxu + m.nyu);

  std::vector<double> vxb, vyb;
  m.normal_faces(b, vxb, vyb);
  Vec fx, fy;
  m.momentum_rhs(b, vxb, vyb, forcing, extra_x, extra_y, fx, fy);

  // g~ = -(boundary part of the divergence).
  Vec gt(g.cell_count());
  {
    VelocityField vb = VelocityField::zeros(g);
    vb.vx = vxb;
    vb.vy = vyb;
    const std::vector<double> d = discrete_divergence(vb, g);
    for (int k = 0; k < g.cell_count(); ++k) gt[k] = -d[static_cast<std::size_t>(k)];
  }

  Vec p = Vec::Zero(g.cell_count());
  if (pressure_guess && pressure_guess->size() == static_cast<std::size_t>(g.cell_count())) {
    for (int k = 0; k < g.cell_count(); ++k) p[k] = (*pressure_guess)[static_cast<std::size_t>(k)];
    p.array() -= mean(p);
  }

  Vec gx, gy, ax, ay;
  m.div_transpose(p, gx, gy);
  m.solve_blocks(fx + gx, fy + gy, ax, ay);
  Vec r = gt - m.div_interior(ax, ay);
  r.array() -= mean(r);

  SolveStats local;
  auto converged = [&](const Vec& res) {
    local.div_residual = m.l2_cells(res);
    local.max_div = res.size() ? res.cwiseAbs().maxCoeff() : 0.0;
    return local.div_residual <= s.tolerance && local.max_div <= s.tolerance;
  };
  SpMat Ax = m.Kx * m.nu, Ay = m.Ky * m.nu;
  for (int k = 0; k < m.nxu; ++k) Ax.valuePtr()[m.diag_x[k]] += cx[k];
  for (int k = 0; k < m.nyu; ++k) Ay.valuePtr()[m.diag_y[k]] += cy[k];
  auto momentum = [&]() {
    Vec px, py;
    m.div_transpose(p, px, py);
    const Vec mx = Ax * ax - px - fx;
    const Vec my = Ay * ay - py - fy;
    return std::sqrt((mx.squaredNorm() + my.squaredNorm()) * g.cell_area());
  };
  auto record = [&](int it) {
    if (s.trace) local.trace.push_back({it, momentum(), local.div_residual});
  };

  int it = 0;
  bool done = converged(r);
  record(0);
  if (!done) {
    if (!s.uzawa_step) {
      Vec z = m.precondition(r, cbar);
      Vec d = z;
      double rz = r.dot(z);
      while (!done && it < s.max_iterations) {
        ++it;
        Vec wx, wy;
        m.div_transpose(d, gx, gy);
        m.solve_blocks(gx, gy, wx, wy);
        Vec sd = m.div_interior(wx, wy);
        const double dsd = d.dot(sd);
        if (!(dsd > 0.0)) break;
        const double alpha = rz / dsd;
        p += alpha * d;
        ax += alpha * wx;
        ay += alpha * wy;
        r -= alpha * sd;
        r.array() -= mean(r);
        done = converged(r);
        record(it);
        if (done) break;
        z = m.precondition(r, cbar);
        const double rz_new = r.dot(z);
        d = z + (rz_new / rz) * d;
        rz = rz_new;
      }
    } else {
      const double omega = *s.uzawa_step;
      while (!done && it < s.max_iterations) {
        ++it;
        Vec z = m.precondition(r, cbar);
        Vec wx, wy;
        m.div_transpose(z, gx, gy);
        m.solve_blocks(gx, gy, wx, wy);
        p += omega * z;
        ax += omega * wx;
        ay += omega * wy;
        r = gt - m.div_interior(ax, ay);
        r.array() -= mean(r);
        if (!std::isfinite(r.squaredNorm())) break;
        done = converged(r);
        record(it);
      }
    }
  }
  local.iterations = it;
  if (!done) {
    throw SolverError("saddle-point iteration stopped at divergence residual " +
                          std::to_string(local.div_residual) + " after " + std::to_string(it) +
                          " iterations",
                      local.div_residual, it);
  }

  local.momentum_residual = momentum();
  VelocityField v = VelocityField::zeros(g);
  v.vx = vxb;
  v.vy = vyb;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i) v.vx[g.xface(i, j)] = ax[m.ux(i, j)];
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) v.vy[g.yface(i, j)] = ay[m.uy(i, j)];
  for (int k = 0; k < g.cell_count(); ++k) v.p[k] = p[k];
  v.bt = b.b_t;
  for (double x : v.vx)
    if (!std::isfinite(x)) throw NumericError("non-finite velocity from the saddle-point solve");
  if (stats) *stats = std::move(local);
  return v;
}

LiftingResult StokesBrinkman::solve_lifting(const BoundarySnapshot& b, SolveStats* stats) {
  LiftingResult out;
  out.v = solve({}, 0.0, b, nullptr, stats, nullptr);
  const double bn = boundary_norm(b, impl_->grid);
  out.estimate_ratio = bn > 0.0 ? velocity_h1(out.v, impl_->grid) / bn : 0.0;
  return out;
}

VelocityField StokesBrinkman::solve_quasi_stationary(std::span<const double> h_cells,
                                                     const BoundarySnapshot& b,
                                                     const FaceForcing* forcing,
                                                     SolveStats* stats,
                                                     const std::vector<double>* pressure_guess) {
  if (h_cells.empty()) throw DomainError("quasi-stationary solve needs a damping field");
  return solve(h_cells, 0.0, b, forcing, stats, pressure_guess);
}

VelocityField StokesBrinkman::step_unsteady(const VelocityField& v_prev,
                                            std::span<const double> h_cells,
                                            const BoundarySnapshot& b_next, double tau, double dt,
                                            SolveStats* stats) {
  if (!(tau > 0.0) || !(dt > 0.0)) throw DomainError("unsteady step needs tau > 0 and dt > 0");
  const StaggeredGrid& g = impl_->grid;
  if (v_prev.vx.size() != static_cast<std::size_t>(g.xface_count()) ||
      v_prev.vy.size() != static_cast<std::size_t>(g.yface_count()))
    throw DomainError("previous velocity does not match the grid");
  if (h_cells.size() != static_cast<std::size_t>(g.cell_count()))
    throw DomainError("damping field does not match the grid");
  for (double v : h_cells)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("damping field must be positive");
  check_compatible(b_next, g);
  const double sigma = tau / dt;
  std::vector<double> ex(v_prev.vx), ey(v_prev.vy);
  for (double& x : ex) x *= sigma;
  for (double& y : ey) y *= sigma;
  return solve_with_extra(h_cells, sigma, b_next, nullptr, &ex, &ey, stats, &v_prev.p);
}

EnergyBalance StokesBrinkman::energy_balance(const VelocityField& v,
                                             std::span<const double> h_cells, double sigma,
                                             const FaceForcing* forcing) const {
  const Impl& m = *impl_;
  const StaggeredGrid& g = m.grid;
  Vec cx, cy;
  m.face_damping(h_cells, sigma, cx, cy);
  const double area = g.cell_area();

  double damp = 0.0, fwork = 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 1; i < g.nx(); ++i) {
      const double x = v.vx[g.xface(i, j)];
      damp += cx[m.ux(i, j)] * x * x;
      if (forcing) fwork += forcing->fx[g.xface(i, j)] * x;
    }
  }
  for (int j = 1; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const double y = v.vy[g.yface(i, j)];
      damp += cy[m.uy(i, j)] * y * y;
      if (forcing) fwork += forcing->fy[g.yface(i, j)] * y;
    }
  }

  VelocityField lift = VelocityField::zeros(g);
  for (int k = 0; k < g.boundary_count(); ++k) {
    const BoundaryFace& f = g.boundary()[k];
    if (f.side == Side::left || f.side == Side::right) lift.vx[f.face] = v.vx[f.face];
    else lift.vy[f.face] = v.vy[f.face];
  }
  lift.bt = v.bt;
  const std::vector<double> dl = discrete_divergence(lift, g);
  double pdiv = 0.0;
  for (int k = 0; k < g.cell_count(); ++k) pdiv += v.p[k] * dl[static_cast<std::size_t>(k)];

  EnergyBalance e;
  e.dissipation = m.nu * dirichlet_form(v, v, g) + area * damp;
  e.boundary_work = m.nu * dirichlet_form(v, lift, g) - area * pdiv + area * fwork;
  return e;
}

double StokesBrinkman::dual_norm_proxy(const VelocityField& w) {
  Impl& m = *impl_;
  const StaggeredGrid& g = m.grid;
  if (!m.unit_x) {
    m.unit_x = std::make_unique<Ldlt>();
    m.unit_y = std::make_unique<Ldlt>();
    if (m.nxu) m.unit_x->compute(m.Kx);
    if (m.nyu) m.unit_y->compute(m.Ky);
  }
  Vec wx(m.nxu), wy(m.nyu);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i) wx[m.ux(i, j)] = w.vx[g.xface(i, j)];
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) wy[m.uy(i, j)] = w.vy[g.yface(i, j)];
  double s = 0.0;
  if (m.nxu) s += wx.dot(m.unit_x->solve(wx));
  if (m.nyu) s += wy.dot(m.unit_y->solve(wy));
  return std::sqrt(std::max(0.0, s * g.cell_area()));
}

double dirichlet_form(const VelocityField& a, const VelocityField& b, const StaggeredGrid& grid) {
  const int nx = grid.nx(), ny = grid.ny();
  const double wx = grid.dy() / grid.dx();
  const double wy = grid.dx() / grid.dy();
  double s = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double da = a.vx[grid.xface(i + 1, j)] - a.vx[grid.xface(i, j)];
      const double db = b.vx[grid.xface(i + 1, j)] - b.vx[grid.xface(i, j)];
      s += wx * da * db;
    }
  }
  for (int i = 1; i < nx; ++i) {
    for (int j = 0; j + 1 < ny; ++j) {
      const double da = a.vx[grid.xface(i, j + 1)] - a.vx[grid.xface(i, j)];
      const double db = b.vx[grid.xface(i, j + 1)] - b.vx[grid.xface(i, j)];
      s += wy * da * db;
    }
    const double a0 = a.vx[grid.xface(i, 0)] - wall_vertex_value(grid, a.bt, Side::bottom, i);
    const double b0 = b.vx[grid.xface(i, 0)] - wall_vertex_value(grid, b.bt, Side::bottom, i);
    const double a1 = a.vx[grid.xface(i, ny - 1)] - wall_vertex_value(grid, a.bt, Side::top, i);
    const double b1 = b.vx[grid.xface(i, ny - 1)] - wall_vertex_value(grid, b.bt, Side::top, i);
    s += 2.0 * wy * (a0 * b0 + a1 * b1);
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double da = a.vy[grid.yface(i, j + 1)] - a.vy[grid.yface(i, j)];
      const double db = b.vy[grid.yface(i, j + 1)] - b.vy[grid.yface(i, j)];
      s += wy * da * db;
    }
  }
  for (int j = 1; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const double da = a.vy[grid.yface(i + 1, j)] - a.vy[grid.yface(i, j)];
      const double db = b.vy[grid.yface(i + 1, j)] - b.vy[grid.yface(i, j)];
      s += wx * da * db;
    }
    const double a0 = a.vy[grid.yface(0, j)] - wall_vertex_value(grid, a.bt, Side::left, j);
    const double b0 = b.vy[grid.yface(0, j)] - wall_vertex_value(grid, b.bt, Side::left, j);
    const double a1 = a.vy[grid.yface(nx - 1, j)] - wall_vertex_value(grid, a.bt, Side::right, j);
    const double b1 = b.vy[grid.yface(nx - 1, j)] - wall_vertex_value(grid, b.bt, Side::right, j);
    s += 2.0 * wx * (a0 * b0 + a1 * b1);
  }
  return s;
}

double boundary_norm(const BoundarySnapshot& b, const StaggeredGrid& grid) {
  double l2 = 0.0, h1 = 0.0;
  const auto& faces = grid.boundary();
  for (std::size_t k = 0; k < faces.size(); ++k) {
    l2 += (b.b_n[k] * b.b_n[k] + b.b_t[k] * b.b_t[k]) * faces[k].length;
    if (k + 1 < faces.size() && faces[k + 1].side == faces[k].side) {
      const double dn = b.b_n[k + 1] - b.b_n[k];
      const double dt = b.b_t[k + 1] - b.b_t[k];
      h1 += (dn * dn + dt * dt) / faces[k].length;
    }
  }
  return std::sqrt(l2) + std::sqrt(h1);
}

LiftingResult solve_lifting(const StaggeredGrid& grid, const BoundarySnapshot& b, double nu,
                            const SolverSettings& settings) {
  StokesBrinkman s(grid, nu, settings);
  return s.solve_lifting(b);
}

VelocityField solve_quasi_stationary(const StaggeredGrid& grid, std::span<const double> h_cells,
                                     const BoundarySnapshot& b, double nu,
                                     const FaceForcing* forcing, const SolverSettings& settings) {
  StokesBrinkman s(grid, nu, settings);
  return s.solve_quasi_stationary(h_cells, b, forcing);
}

VelocityField step_unsteady(const VelocityField& v_prev, const StaggeredGrid& grid,
                            std::span<const double> h_cells, const BoundarySnapshot& b_next,
                            double nu, double tau, double dt, const SolverSettings& settings) {
  StokesBrinkman s(grid, nu, settings);
  return s.step_unsteady(v_prev, h_cells, b_next, tau, dt);
}

VelocityField solve_B_tau(const StaggeredGrid& grid, std::span<const double> h_cells,
                          const BoundarySnapshot& b, double nu, const SolverSettings& settings) {
  StokesBrinkman s(grid, nu, settings);
  return s.solve_B_tau(h_cells, b);
}

MmsResult manufactured_error(int nx, double nu, const SolverSettings& settings) {
  const double pi = std::numbers::pi;
  const StaggeredGrid g(nx, nx);
  const auto wx = [&](double x, double y) { return std::sin(pi * x) * std::cos(pi * y); };
  const auto wy = [&](double x, double y) { return -std::cos(pi * x) * std::sin(pi * y); };
  const auto ps = [&](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); };
  const double c = 2.0 * pi * pi * nu + 1.0;

  FaceForcing f;
  VelocityField exact = VelocityField::zeros(g);
  f.fx.assign(g.xface_count(), 0.0);
  f.fy.assign(g.yface_count(), 0.0);
  for (int j = 0; j < nx; ++j)
    for (int i = 0; i <= nx; ++i) {
      const double x = i * g.dx(), y = g.yc(j);
      f.fx[g.xface(i, j)] = c * wx(x, y) - pi * std::sin(pi * x) * std::cos(pi * y);
      exact.vx[g.xface(i, j)] = wx(x, y);
    }
  for (int j = 0; j <= nx; ++j)
    for (int i = 0; i < nx; ++i) {
      const double x = g.xc(i), y = j * g.dy();
      f.fy[g.yface(i, j)] = c * wy(x, y) - pi * std::cos(pi * x) * std::sin(pi * y);
      exact.vy[g.yface(i, j)] = wy(x, y);
    }
  BoundarySnapshot b;
  const int nb = g.boundary_count();
  b.u_b.assign(nb, 0.0);
  b.b_n.assign(nb, 0.0);
  b.b_t.assign(nb, 0.0);
  for (int k = 0; k < nb; ++k) {
    const BoundaryFace& face = g.boundary()[k];
    const double ux = wx(face.x, face.y), uy = wy(face.x, face.y);
    b.b_n[k] = ux * face.normal_x + uy * face.normal_y;
    b.b_t[k] = (face.side == Side::bottom || face.side == Side::top) ? ux : uy;
  }
  exact.bt = b.b_t;
  const std::vector<double> h(g.cell_count(), 1.0);

  MmsResult r;
  r.nx = nx;
  StokesBrinkman solver(g, nu, settings);
  const VelocityField v = solver.solve_quasi_stationary(h, b, &f, &r.stats);
  r.velocity_l2_error = velocity_l2(difference(v, exact), g);

  std::vector<double> pe(g.cell_count());
  double mean = 0.0;
  for (int j = 0; j < nx; ++j)
    for (int i = 0; i < nx; ++i) mean += ps(g.xc(i), g.yc(j));
  mean /= g.cell_count();
  for (int j = 0; j < nx; ++j)
    for (int i = 0; i < nx; ++i)
      pe[g.cell(i, j)] = v.p[g.cell(i, j)] - (ps(g.xc(i), g.yc(j)) - mean);
  r.pressure_l2_error = norm(pe, g, NormKind::L2);
  return r;
}

}  // namespace blsim
