#include "blsim/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "blsim/errors.hpp"

namespace blsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pos(double x) { return x > 0.0 ? x : 0.0; }

// Gaussian bump used by the v-differentiated balance.
constexpr double kPsiCentre = 0.5;
constexpr double kPsiWidth = 0.15;
double psi(double v) {
  const double z = (v - kPsiCentre) / kPsiWidth;
  return std::exp(-0.5 * z * z);
}
double psi_prime(double v) { return -(v - kPsiCentre) / (kPsiWidth * kPsiWidth) * psi(v); }
double Psi(double u) {
  return kPsiWidth * std::sqrt(std::acos(-1.0) / 2.0) *
         (1.0 + std::erf((u - kPsiCentre) / (kPsiWidth * std::sqrt(2.0))));
}

std::vector<double> trapezoid_weights(const std::vector<double>& v) {
  std::vector<double> w(v.size(), 0.0);
  for (std::size_t j = 0; j + 1 < v.size(); ++j) {
    const double h = v[j + 1] - v[j];
    w[j] += 0.5 * h;
    w[j + 1] += 0.5 * h;
  }
  return w;
}

}  // namespace

VGrid VGrid::standard(int points, double delta) {
  if (points < 2 || !(delta > 0.0)) throw DomainError("v-grid needs >= 2 points and delta > 0");
  VGrid g;
  g.v.push_back(-delta);
  for (int j = 0; j < points; ++j) g.v.push_back(static_cast<double>(j) / (points - 1));
  g.v.push_back(1.0 + delta);
  return g;
}

double VGrid::spacing() const {
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < v.size(); ++j) s = std::max(s, v[j + 1] - v[j]);
  return s;
}

void VGrid::validate() const {
  if (v.size() < 3) throw DomainError("v-grid needs at least three values");
  for (std::size_t j = 0; j + 1 < v.size(); ++j)
    if (!(v[j + 1] > v[j])) throw DomainError("v-grid must be strictly increasing");
  if (!(v.front() < 0.0) || !(v.back() > 1.0))
    throw DomainError("v-grid must reach below 0 and above 1");
}

void Certificate::add(std::string name, double v, double value, double bound, bool pass,
                      std::string detail) {
  rows.push_back({std::move(name), v, value, bound, pass, std::move(detail)});
}

void Certificate::append(const Certificate& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

bool Certificate::ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const CertificateRow& r) { return r.pass; });
}

const CertificateRow* Certificate::first_failure() const {
  for (const auto& r : rows)
    if (!r.pass) return &r;
  return nullptr;
}

KineticField build_kinetic(const StaggeredGrid& grid, const std::vector<double>& times,
                           const std::vector<std::vector<double>>& levels, const VGrid& vgrid) {
  vgrid.validate();
  if (times.size() != levels.size()) throw DomainError("times and levels differ in length");
  KineticField kf;
  kf.times = times;
  kf.vgrid = vgrid.v;
  kf.cells = grid.cell_count();
  kf.faces = grid.boundary_count();
  const std::size_t nv = vgrid.v.size();
  kf.f.resize(levels.size() * kf.cells * nv);
  kf.fb.resize(levels.size() * kf.faces * nv);
  kf.u.reserve(levels.size() * kf.cells);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& u = levels[l];
    if (u.size() != static_cast<std::size_t>(kf.cells))
      throw DomainError("saturation level does not match the grid");
    kf.u.insert(kf.u.end(), u.begin(), u.end());
    for (int c = 0; c < kf.cells; ++c)
      for (std::size_t j = 0; j < nv; ++j)
        kf.f[(l * kf.cells + c) * nv + j] = sgn_plus(u[c] - vgrid.v[j]);
    for (int k = 0; k < kf.faces; ++k) {
      const int c = grid.boundary()[k].cell;
      for (std::size_t j = 0; j < nv; ++j)
        kf.fb[(l * kf.faces + k) * nv + j] = sgn_plus(u[c] - vgrid.v[j]);
    }
  }
  return kf;
}

KineticField build_kinetic(const Trajectory& traj, const VGrid& vgrid) {
  std::vector<double> times;
  std::vector<std::vector<double>> levels;
  for (const auto& s : traj.snapshots) {
    times.push_back(s.t);
    levels.push_back(s.u);
  }
  return build_kinetic(traj.grid, times, levels, vgrid);
}

Certificate indicator_certificate(const KineticField& kf) {
  Certificate cert;
  const int nv = kf.nv();
  double dv = 0.0;
  for (int j = 0; j + 1 < nv; ++j) dv = std::max(dv, kf.vgrid[j + 1] - kf.vgrid[j]);

  double worst_idem = 0.0, worst_incr = 0.0, worst_below = 0.0, worst_above = 0.0;
  double worst_z = 0.0, worst_cake1 = 0.0, worst_cake2 = 0.0;
  std::string where_idem, where_incr, where_below, where_above, where_z;
  auto loc = [](int l, int c, int j) {
    std::ostringstream os;
    os << "level " << l << " cell " << c << " v-index " << j;
    return os.str();
  };
  for (int l = 0; l < kf.levels(); ++l) {
    for (int c = 0; c < kf.cells; ++c) {
      double z = kf.vgrid.front() - dv;
      double cake1 = 0.0, cake2 = 0.0;
      for (int j = 0; j < nv; ++j) {
        const double f = kf.at(l, c, j);
        const double v = kf.vgrid[j];
        const double idem = std::abs(f - f * f) + ((f == 0.0 || f == 1.0) ? 0.0 : 1.0);
        if (idem > worst_idem) { worst_idem = idem; where_idem = loc(l, c, j); }
        if (j + 1 < nv) {
          const double inc = kf.at(l, c, j + 1) - f;
          if (inc > worst_incr) { worst_incr = inc; where_incr = loc(l, c, j + 1); }
        }
        if (v < 0.0 && std::abs(f - 1.0) > worst_below) {
          worst_below = std::abs(f - 1.0);
          where_below = loc(l, c, j);
        }
        if (v > 1.0 && std::abs(f) > worst_above) {
          worst_above = std::abs(f);
          where_above = loc(l, c, j);
        }
        if (f == 1.0) z = std::max(z, v);
        if (v >= 0.0 && j + 1 < nv && kf.vgrid[j + 1] <= 1.0) {
          const double w = kf.vgrid[j + 1] - v;
          cake1 += f * w;
          cake2 += 2.0 * v * f * w;
        }
      }
      const double u = kf.u[static_cast<std::size_t>(l) * kf.cells + c];
      if (std::abs(z - u) > worst_z) { worst_z = std::abs(z - u); where_z = loc(l, c, -1); }
      const double uc = std::clamp(u, 0.0, 1.0);
      worst_cake1 = std::max(worst_cake1, std::abs(cake1 - uc));
      worst_cake2 = std::max(worst_cake2, std::abs(cake2 - uc * uc));
    }
  }
  const double slack = dv * (1.0 + 1e-12);
  cert.add("indicator_f_eq_f2", 0.0, worst_idem, 0.0, worst_idem == 0.0, where_idem);
  cert.add("indicator_dv_nonincreasing", 0.0, worst_incr, 0.0, worst_incr <= 0.0, where_incr);
  cert.add("indicator_support_below_0", 0.0, worst_below, 0.0, worst_below == 0.0, where_below);
  cert.add("indicator_support_above_1", 0.0, worst_above, 0.0, worst_above == 0.0, where_above);
  cert.add("indicator_z_reconstruction", 0.0, worst_z, dv, worst_z <= slack, where_z);
  cert.add("layer_cake_u", 0.0, worst_cake1, dv, worst_cake1 <= slack);
  cert.add("layer_cake_u2", 0.0, worst_cake2, 2.0 * dv, worst_cake2 <= 2.0 * slack);
  return cert;
}

double scheme_scale(const StaggeredGrid& grid, const FluxModel& model, double epsilon,
                    double vmax) {
  const double h = grid.slice_mode() ? grid.dx() : std::min(grid.dx(), grid.dy());
  double diff = 1.0 / (grid.dx() * grid.dx());
  if (!grid.slice_mode()) diff += 1.0 / (grid.dy() * grid.dy());
  return std::max(1.0, model.K() * vmax / h + 2.0 * epsilon * diff);
}

MEstimateResult m_estimate_check(const DefectMeasure& m) {
  MEstimateResult r;
  r.lhs_plus = m.plus_mass;
  r.rhs_plus = m.rhs_plus;
  r.margin_plus = m.rhs_plus - m.plus_mass;
  r.lhs_minus = m.minus_mass;
  r.rhs_minus = m.rhs_minus;
  r.margin_minus = m.rhs_minus - m.minus_mass;
  const double tp = 1e-12 * std::max(1.0, m.rhs_plus);
  const double tm = 1e-12 * std::max(1.0, m.rhs_minus);
  r.pass = r.margin_plus >= -tp && r.margin_minus >= -tm;
  return r;
}

// ---------------------------------------------------------------------------

EntropyAccumulator::EntropyAccumulator(FluxModel model, TransportSettings settings,
                                       std::vector<double> levels, bool keep_cells)
    : model_(std::move(model)), settings_(settings), levels_(std::move(levels)),
      keep_cells_(keep_cells) {}

void EntropyAccumulator::begin(const StaggeredGrid& grid, std::span<const double> u0, double) {
  grid_ = grid;
  const double area = grid.cell_area();
  measures_.assign(levels_.size(), DefectMeasure{});
  kinetic_boundary_.assign(levels_.size(), 0.0);
  robin_boundary_.assign(levels_.size(), 0.0);
  steps_ = 0;
  scale_ = 1.0;
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    DefectMeasure& m = measures_[j];
    m.v = levels_[j];
    m.min_plus_density = kInf;
    m.min_minus_density = kInf;
    for (double u : u0) {
      m.rhs_plus += area * pos(u - m.v);
      m.rhs_minus += area * pos(m.v - u);
    }
    if (keep_cells_) {
      m.plus_cells.assign(u0.size(), 0.0);
      m.minus_cells.assign(u0.size(), 0.0);
    }
  }
  psi_initial_ = 0.0;
  for (double u : u0) psi_initial_ += area * Psi(u);
}

void EntropyAccumulator::step(const StepView& s) {
  const StaggeredGrid& g = *grid_;
  const int nx = g.nx(), ny = g.ny();
  const double dx = g.dx(), dy = g.dy(), area = g.cell_area();
  const double dt = s.dt();
  const VelocityField& v = *s.v;
  const BoundarySnapshot& b = *s.b;
  const auto& uo = s.u_old;
  const auto& un = s.u_new;
  const std::size_t nc = uo.size();
  scale_ = std::max(scale_, blsim::scheme_scale(g, model_, settings_.epsilon,
                                                std::max(max_abs(v.vx), max_abs(v.vy))));
  ++steps_;

  std::vector<double> qp(nc), qm(nc);
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    const double k = levels_[j];
    const double gk = model_.g(k);
    std::fill(qp.begin(), qp.end(), 0.0);
    std::fill(qm.begin(), qm.end(), 0.0);
    for (int jj = 0; jj < ny; ++jj) {
      for (int i = 1; i < nx; ++i) {
        const int l = g.cell(i - 1, jj), r = g.cell(i, jj);
        const double vn = v.vx[g.xface(i, jj)];
        const double a = uo[l], c = uo[r];
        const double Fk = vn * gk;
        const double Qp =
            (interior_flux(std::max(a, k), std::max(c, k), vn, dx, model_, settings_) - Fk) * dy;
        const double Qm =
            (Fk - interior_flux(std::min(a, k), std::min(c, k), vn, dx, model_, settings_)) * dy;
        qp[l] += Qp;
        qp[r] -= Qp;
        qm[l] += Qm;
        qm[r] -= Qm;
      }
    }
    for (int jj = 1; jj < ny; ++jj) {
      for (int i = 0; i < nx; ++i) {
        const int l = g.cell(i, jj - 1), r = g.cell(i, jj);
        const double vn = v.vy[g.yface(i, jj)];
        const double a = uo[l], c = uo[r];
        const double Fk = vn * gk;
        const double Qp =
            (interior_flux(std::max(a, k), std::max(c, k), vn, dy, model_, settings_) - Fk) * dx;
        const double Qm =
            (Fk - interior_flux(std::min(a, k), std::min(c, k), vn, dy, model_, settings_)) * dx;
        qp[l] += Qp;
        qp[r] -= Qp;
        qm[l] += Qm;
        qm[r] -= Qm;
      }
    }
    DefectMeasure& m = measures_[j];
    for (int f = 0; f < g.boundary_count(); ++f) {
      const BoundaryFace& face = g.boundary()[f];
      const double vo = outward_velocity(v, g, f);
      const double M = robin_coefficient(model_, b.b_n[f]);
      const double ui = uo[face.cell], ub = b.u_b[f];
      const double Fk = boundary_flux(k, k, vo, M, model_, settings_);
      const double Qp = boundary_flux(std::max(ui, k), std::max(ub, k), vo, M, model_, settings_) - Fk;
      const double Qm = Fk - boundary_flux(std::min(ui, k), std::min(ub, k), vo, M, model_, settings_);
      qp[face.cell] += Qp * face.length;
      qm[face.cell] += Qm * face.length;
      m.rhs_plus += dt * face.length * M * pos(ub - k);
      m.rhs_minus += dt * face.length * M * pos(k - ub);
      const double trace = vo < 0.0 ? ub : ui;
      kinetic_boundary_[j] += dt * face.length * vo * sgn_plus(trace - k);
      if (settings_.epsilon > 0.0 && vo >= 0.0)
        robin_boundary_[j] += dt * face.length * M * (pos(ui - k) - pos(ub - k));
    }
    const double inv = 1.0 / (area * dt);
    for (std::size_t c = 0; c < nc; ++c) {
      const double mp = -(area * (pos(un[c] - k) - pos(uo[c] - k)) + dt * qp[c]);
      const double mm = -(area * (pos(k - un[c]) - pos(k - uo[c])) + dt * qm[c]);
      m.min_plus_density = std::min(m.min_plus_density, mp * inv);
      m.min_minus_density = std::min(m.min_minus_density, mm * inv);
      m.plus_mass += mp;
      m.minus_mass += mm;
      if (keep_cells_) {
        m.plus_cells[c] += mp;
        m.minus_cells[c] += mm;
      }
    }
  }
}

void EntropyAccumulator::end(std::span<const double> u_final, double) {
  psi_final_ = 0.0;
  const double area = grid_ ? grid_->cell_area() : 0.0;
  for (double u : u_final) psi_final_ += area * Psi(u);
  for (auto& m : measures_) {
    if (m.min_plus_density == kInf) m.min_plus_density = 0.0;
    if (m.min_minus_density == kInf) m.min_minus_density = 0.0;
  }
}

std::pair<double, double> EntropyAccumulator::v_balance() const {
  const std::vector<double> w = trapezoid_weights(levels_);
  double lhs = 0.0, rhs = psi_initial_ - psi_final_;
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    const double v = levels_[j];
    lhs += w[j] * psi_prime(v) * measures_[j].plus_mass;
    rhs -= w[j] * psi(v) * model_.gprime(v) * kinetic_boundary_[j];
    rhs -= w[j] * psi_prime(v) * robin_boundary_[j];
  }
  return {lhs, rhs};
}

DefectMeasure entropy_production(const Trajectory& traj, double v) {
  EntropyAccumulator acc(traj.model, traj.transport, {v});
  replay(traj, acc);
  return acc.measures().front();
}

// ---------------------------------------------------------------------------

HatFamily HatFamily::standard(double T, double Lx, double Ly) {
  HatFamily h;
  h.t_centres = {0.0, T / 4.0, T / 2.0, 3.0 * T / 4.0};
  h.t_half = T / 4.0;
  h.x_centres = {0.0, Lx / 3.0, 2.0 * Lx / 3.0, Lx};
  h.x_half = Lx / 3.0;
  h.y_centres = {0.0, Ly / 3.0, 2.0 * Ly / 3.0, Ly};
  h.y_half = Ly / 3.0;
  return h;
}

void HatFamily::validate(double T) const {
  if (!(t_half > 0.0)) throw DomainError("hat half widths must be > 0");
  if ((!x_centres.empty() && !(x_half > 0.0)) || (!y_centres.empty() && !(y_half > 0.0)))
    throw DomainError("hat half widths must be > 0");
  for (double c : t_centres)
    if (c + t_half > T * (1.0 + 1e-12))
      throw DomainError("test function support must end before T");
  if (!weights.empty()) {
    if (weights.size() != static_cast<std::size_t>(size()))
      throw DomainError("one weight per test function expected");
    for (double w : weights)
      if (!(w >= 0.0)) throw DomainError("test functions must be nonnegative");
  }
}

WeakResidualAccumulator::WeakResidualAccumulator(FluxModel model, std::vector<double> levels,
                                                 HatFamily family, double T)
    : model_(std::move(model)), levels_(std::move(levels)), family_(std::move(family)), T_(T) {
  family_.validate(T_);
}

double WeakResidualAccumulator::hat(double c, double half, double x) const {
  return std::max(0.0, 1.0 - std::abs(x - c) / half);
}

double WeakResidualAccumulator::hat_mean(double c, double half, double a, double b) const {
  const auto prim = [&](double x) {
    const double z = std::clamp((x - c) / half, -1.0, 1.0);
    return half * (z <= 0.0 ? 0.5 * (z + 1.0) * (z + 1.0) : 1.0 - 0.5 * (1.0 - z) * (1.0 - z));
  };
  return (prim(b) - prim(a)) / (b - a);
}

void WeakResidualAccumulator::contract(const std::vector<double>& w, const std::vector<double>& bx,
                                       const std::vector<double>& cy,
                                       std::vector<double>& out) const {
  const StaggeredGrid& g = *grid_;
  const int nx = g.nx(), ny = g.ny();
  const std::size_t nk = family_.x_centres.size(), nl = family_.y_centres.size();
  std::vector<double> rows(nk * ny, 0.0);
  for (int j = 0; j < ny; ++j) {
    const double* wr = w.data() + static_cast<std::size_t>(j) * nx;
    for (std::size_t k = 0; k < nk; ++k) {
      const double* b = bx.data() + k * nx;
      double s = 0.0;
      for (int i = 0; i < nx; ++i) s += wr[i] * b[i];
      rows[k * ny + j] = s;
    }
  }
  out.assign(nk * nl, 0.0);
  for (std::size_t k = 0; k < nk; ++k)
    for (std::size_t l = 0; l < nl; ++l) {
      double s = 0.0;
      for (int j = 0; j < ny; ++j) s += rows[k * ny + j] * cy[l * ny + j];
      out[k * nl + l] = s;
    }
}

void WeakResidualAccumulator::begin(const StaggeredGrid& grid, std::span<const double> u0,
                                    double t0) {
  grid_ = grid;
  if (family_.x_centres.empty() || family_.y_centres.empty()) {
    const HatFamily sp = HatFamily::standard(T_, grid.Lx(), grid.Ly());
    family_.x_centres = sp.x_centres;
    family_.x_half = sp.x_half;
    family_.y_centres = sp.y_centres;
    family_.y_half = sp.y_half;
  }
  const int nx = grid.nx(), ny = grid.ny();
  const std::size_t nk = family_.x_centres.size(), nl = family_.y_centres.size();
  X_.assign(nk * nx, 0.0);
  DX_.assign(nk * nx, 0.0);
  Y_.assign(nl * ny, 0.0);
  DY_.assign(nl * ny, 0.0);
  // The discrete solution is constant per cell, so the hats are integrated
  // exactly over each cell; the mean slope is the face difference.
  const double dx = grid.dx(), dy = grid.dy();
  for (std::size_t k = 0; k < nk; ++k)
    for (int i = 0; i < nx; ++i) {
      const double c = family_.x_centres[k], a = i * dx, b = (i + 1) * dx;
      X_[k * nx + i] = hat_mean(c, family_.x_half, a, b);
      DX_[k * nx + i] = (hat(c, family_.x_half, b) - hat(c, family_.x_half, a)) / dx;
    }
  for (std::size_t l = 0; l < nl; ++l)
    for (int j = 0; j < ny; ++j) {
      const double c = family_.y_centres[l], a = j * dy, b = (j + 1) * dy;
      Y_[l * ny + j] = hat_mean(c, family_.y_half, a, b);
      DY_[l * ny + j] = (hat(c, family_.y_half, b) - hat(c, family_.y_half, a)) / dy;
    }
  const int nf = family_.size();
  results_.assign(levels_.size(), WeakResidual{});
  std::vector<double> w(u0.size()), S;
  for (std::size_t jv = 0; jv < levels_.size(); ++jv) {
    WeakResidual& r = results_[jv];
    r.v = levels_[jv];
    r.residuals.assign(nf, 0.0);
    for (std::size_t c = 0; c < u0.size(); ++c) w[c] = std::abs(u0[c] - r.v);
    contract(w, X_, Y_, S);
    for (std::size_t a = 0; a < family_.t_centres.size(); ++a) {
      const double Ta = hat(family_.t_centres[a], family_.t_half, t0);
      for (std::size_t kl = 0; kl < S.size(); ++kl)
        r.residuals[a * S.size() + kl] += Ta * S[kl] * grid.cell_area();
    }
  }
  max_dt_ = 0.0;
}

void WeakResidualAccumulator::step(const StepView& s) {
  const StaggeredGrid& g = *grid_;
  const int nx = g.nx(), ny = g.ny();
  const double area = g.cell_area(), dt = s.dt();
  max_dt_ = std::max(max_dt_, dt);
  const VelocityField& v = *s.v;
  const BoundarySnapshot& b = *s.b;
  const std::size_t nc = s.u_old.size();
  const std::size_t nk = family_.x_centres.size(), nl = family_.y_centres.size();
  const std::size_t nkl = nk * nl;

  std::vector<double> vcx(nc), vcy(nc), gu(nc);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int c = g.cell(i, j);
      vcx[c] = 0.5 * (v.vx[g.xface(i, j)] + v.vx[g.xface(i + 1, j)]);
      vcy[c] = 0.5 * (v.vy[g.yface(i, j)] + v.vy[g.yface(i, j + 1)]);
      gu[c] = model_.g(s.u_old[c]);
    }
  std::vector<double> ta_old(family_.t_centres.size()), ta_new(ta_old.size());
  for (std::size_t a = 0; a < ta_old.size(); ++a) {
    ta_old[a] = hat(family_.t_centres[a], family_.t_half, s.t_old);
    ta_new[a] = hat(family_.t_centres[a], family_.t_half, s.t_new);
  }

  std::vector<double> w(nc), wx(nc), wy(nc), S1, S2, S3, B(nkl);
  for (std::size_t jv = 0; jv < levels_.size(); ++jv) {
    WeakResidual& r = results_[jv];
    const double k = r.v, gk = model_.g(k);
    for (std::size_t c = 0; c < nc; ++c) {
      const double d = s.u_old[c] - k;
      const double q = sgn(d) * (gu[c] - gk);
      w[c] = std::abs(d);
      wx[c] = q * vcx[c];
      wy[c] = q * vcy[c];
    }
    contract(w, X_, Y_, S1);
    contract(wx, DX_, Y_, S2);
    contract(wy, X_, DY_, S3);
    std::fill(B.begin(), B.end(), 0.0);
    for (int f = 0; f < g.boundary_count(); ++f) {
      const BoundaryFace& face = g.boundary()[f];
      const double M = robin_coefficient(model_, b.b_n[f]);
      const double val = M * std::abs(b.u_b[f] - k) * face.length;
      if (val == 0.0) continue;
      const bool vertical = face.normal_x != 0.0;
      const double h2 = 0.5 * face.length;
      for (std::size_t kk = 0; kk < nk; ++kk) {
        const double xc = family_.x_centres[kk];
        const double xb = vertical ? hat(xc, family_.x_half, face.x)
                                   : hat_mean(xc, family_.x_half, face.x - h2, face.x + h2);
        if (xb == 0.0) continue;
        for (std::size_t l = 0; l < nl; ++l) {
          const double yc = family_.y_centres[l];
          const double yb = vertical ? hat_mean(yc, family_.y_half, face.y - h2, face.y + h2)
                                     : hat(yc, family_.y_half, face.y);
          B[kk * nl + l] += val * xb * yb;
        }
      }
    }
    for (std::size_t a = 0; a < ta_old.size(); ++a) {
      const double dT = ta_new[a] - ta_old[a];
      const double Tn = ta_new[a];
      if (dT == 0.0 && Tn == 0.0) continue;
      for (std::size_t kl = 0; kl < nkl; ++kl)
        r.residuals[a * nkl + kl] +=
            dT * S1[kl] * area + dt * Tn * ((S2[kl] + S3[kl]) * area + B[kl]);
    }
  }
  // Refresh the minima (cheap, and keeps the results valid at any time).
  for (auto& r : results_) {
    r.min_residual = kInf;
    for (std::size_t n = 0; n < r.residuals.size(); ++n) {
      const double wgt = family_.weights.empty() ? 1.0 : family_.weights[n];
      const double val = wgt * r.residuals[n];
      if (val < r.min_residual) {
        r.min_residual = val;
        r.argmin = static_cast<int>(n);
      }
    }
  }
}

double WeakResidualAccumulator::min_residual() const {
  double m = kInf;
  for (const auto& r : results_) m = std::min(m, r.min_residual);
  return m == kInf ? 0.0 : m;
}

WeakResidual weak_solution_residual(const Trajectory& traj, double v, const HatFamily& family) {
  WeakResidualAccumulator acc(traj.model, {v}, family, traj.T);
  replay(traj, acc);
  WeakResidual r = acc.residuals().front();
  if (r.argmin < 0) {
    r.min_residual = *std::min_element(r.residuals.begin(), r.residuals.end());
  }
  return r;
}

// ---------------------------------------------------------------------------

BoundaryMeasureAccumulator::BoundaryMeasureAccumulator(FluxModel model, std::vector<double> levels,
                                                       double T, double epsilon)
    : model_(std::move(model)), levels_(std::move(levels)), T_(T), epsilon_(epsilon) {}

void BoundaryMeasureAccumulator::begin(const StaggeredGrid& grid, std::span<const double>, double) {
  grid_ = grid;
  summary_ = BoundaryMeasureSummary{};
}

void BoundaryMeasureAccumulator::step(const StepView& s) {
  const StaggeredGrid& g = *grid_;
  const BoundarySnapshot& b = *s.b;
  const bool late = s.t_old >= 0.5 * T_;
  for (int f = 0; f < g.boundary_count(); ++f) {
    const BoundaryFace& face = g.boundary()[f];
    const double bn = b.b_n[f];
    const double M = robin_coefficient(model_, bn);
    const double ub = b.u_b[f];
    const double ui = s.u_old[face.cell];
    const double vo = outward_velocity(*s.v, g, f);
    const double tr = vo < 0.0 ? ub : ui;
    const double cell_width = face.normal_x != 0.0 ? g.dx() : g.dy();
    const auto width = [&](double vn) {
      return 2.0 * cell_width + (vn != 0.0 ? 4.0 * epsilon_ / std::abs(vn) : 0.0);
    };
    const double gtr = model_.g(tr);
    for (double v : levels_) {
      const double gv = model_.g(v);
      const double mp = (tr > v ? bn * (gtr - gv) : 0.0) + M * pos(ub - v);
      const double mm = (tr < v ? bn * (gv - gtr) : 0.0) + M * pos(v - ub);
      summary_.min_plus = std::min(summary_.min_plus, mp);
      summary_.min_minus = std::min(summary_.min_minus, mm);
      if (v >= 1.0) summary_.support_plus = std::max(summary_.support_plus, std::abs(mp));
      if (v <= 0.0) summary_.support_minus = std::max(summary_.support_minus, std::abs(mm));
      // A level counts once its characteristic has had time to cross the
      // first layer; slower levels sit inside the averaging error.
      const double speed = std::abs(model_.gprime(v) * vo);
      if (late && model_.gprime(v) * bn < 0.0 && speed * s.t_old > width(vo)) {
        ++summary_.inflow_pairs;
        if (sgn_plus(ui - v) != sgn_plus(ub - v)) ++summary_.inflow_mismatch;
      }
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

// Space hats are filled in from the grid once it is known.
HatFamily time_hats(double T) {
  HatFamily f = HatFamily::standard(T, 1.0, 1.0);
  f.x_centres.clear();
  f.y_centres.clear();
  return f;
}

}  // namespace

DiagnosticsObserver::DiagnosticsObserver(const FluxModel& model, const TransportSettings& settings,
                                         double T, VGrid vgrid, bool keep_cells)
    : vgrid_(std::move(vgrid)), model_(model), settings_(settings),
      entropy_(model, settings, vgrid_.v, keep_cells),
      weak_(model, vgrid_.v, time_hats(T), T),
      boundary_(model, vgrid_.v, T, settings.epsilon) {
  vgrid_.validate();
}

void DiagnosticsObserver::begin(const StaggeredGrid& grid, std::span<const double> u0, double t0) {
  grid_ = grid;
  entropy_.begin(grid, u0, t0);
  weak_.begin(grid, u0, t0);
  boundary_.begin(grid, u0, t0);
}

void DiagnosticsObserver::step(const StepView& s) {
  entropy_.step(s);
  weak_.step(s);
  boundary_.step(s);
}

void DiagnosticsObserver::end(std::span<const double> u_final, double t_final) {
  entropy_.end(u_final, t_final);
  weak_.end(u_final, t_final);
  boundary_.end(u_final, t_final);
}

Certificate DiagnosticsObserver::certificate() const {
  Certificate cert;
  const double tol_m = 1e-10 * entropy_.scheme_scale();
  for (const auto& m : entropy_.measures()) {
    cert.add("m_plus_min_density", m.v, m.min_plus_density, -tol_m, m.min_plus_density >= -tol_m);
    cert.add("m_minus_min_density", m.v, m.min_minus_density, -tol_m,
             m.min_minus_density >= -tol_m);
    if (m.v > 1.0) {
      const double val = std::abs(m.plus_mass) + std::abs(m.min_plus_density);
      cert.add("m_plus_support_above_1", m.v, val, 0.0, val == 0.0);
    }
    if (m.v < 0.0) {
      const double val = std::abs(m.minus_mass) + std::abs(m.min_minus_density);
      cert.add("m_minus_support_below_0", m.v, val, 0.0, val == 0.0);
    }
    const MEstimateResult e = m_estimate_check(m);
    cert.add("m_estimate_plus_margin", m.v, e.margin_plus, 0.0, e.pass);
    cert.add("m_estimate_minus_margin", m.v, e.margin_minus, 0.0, e.pass);
  }

  const BoundaryMeasureSummary& bs = boundary_.summary();
  cert.add("boundary_m_plus_min", 0.0, bs.min_plus, -1e-12, bs.min_plus >= -1e-12);
  cert.add("boundary_m_minus_min", 0.0, bs.min_minus, -1e-12, bs.min_minus >= -1e-12);
  cert.add("boundary_m_plus_support", 1.0, bs.support_plus, 0.0, bs.support_plus == 0.0);
  cert.add("boundary_m_minus_support", 0.0, bs.support_minus, 0.0, bs.support_minus == 0.0);
  const double rate =
      bs.inflow_pairs ? static_cast<double>(bs.inflow_mismatch) / bs.inflow_pairs : 0.0;
  cert.add("inflow_trace_mismatch_rate", 0.0, rate, 0.01, rate <= 0.01);

  if (grid_) {
    const StaggeredGrid& g = *grid_;
    const double h = g.slice_mode() ? g.dx() : std::max(g.dx(), g.dy());
    const double tol_weak = 0.1 * (h + weak_.max_dt());
    for (const auto& r : weak_.residuals())
      cert.add("weak_entropy_residual_min", r.v, r.min_residual, -tol_weak,
               r.min_residual >= -tol_weak);
  }

  if (model_.monotone()) {
    const auto [lhs, rhs] = entropy_.v_balance();
    const double dv = vgrid_.spacing();
    const double bound = dv * dv * (std::abs(lhs) + std::abs(rhs) + 1.0);
    cert.add("v_differentiated_balance", 0.0, std::abs(lhs - rhs), bound,
             std::abs(lhs - rhs) <= bound);
  }
  return cert;
}

Certificate certify_trajectory(const Trajectory& traj, const VGrid& vgrid) {
  DiagnosticsObserver obs(traj.model, traj.transport, traj.T, vgrid);
  replay(traj, obs);
  Certificate cert = obs.certificate();
  cert.append(indicator_certificate(build_kinetic(traj, vgrid)));
  return cert;
}

}  // namespace blsim
