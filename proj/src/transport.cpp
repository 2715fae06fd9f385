#include "blsim/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "blsim/errors.hpp"

namespace blsim {

FluxScheme parse_flux_scheme(std::string_view text) {
  if (text == "upwind_monotone") return FluxScheme::upwind_monotone;
  if (text == "engquist_osher") return FluxScheme::engquist_osher;
  if (text == "godunov") return FluxScheme::godunov;
  throw DomainError("unknown flux scheme '" + std::string(text) + "'");
}

std::string_view to_string(FluxScheme scheme) {
  switch (scheme) {
    case FluxScheme::upwind_monotone: return "upwind_monotone";
    case FluxScheme::engquist_osher: return "engquist_osher";
    case FluxScheme::godunov: return "godunov";
  }
  return "?";
}

void TransportSettings::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw DomainError("transport.epsilon must be >= 0");
  if (!(cfl > 0.0) || !(cfl <= 1.0)) throw DomainError("transport.cfl must lie in (0, 1]");
}

double stable_dt(const VelocityField& v, const FluxModel& model, const TransportSettings& settings,
                 const StaggeredGrid& grid, double dt_max) {
  const double K = model.K();
  const double vx = max_abs(v.vx);
  const double vy = max_abs(v.vy);
  const double inf = std::numeric_limits<double>::infinity();
  double bound = inf;
  if (K * vx > 0.0) bound = std::min(bound, grid.dx() / (K * vx));
  if (K * vy > 0.0 && !grid.slice_mode()) bound = std::min(bound, grid.dy() / (K * vy));
  if (settings.epsilon > 0.0) {
    const double h = grid.slice_mode() ? grid.dx() : std::min(grid.dx(), grid.dy());
    bound = std::min(bound, h * h / (4.0 * settings.epsilon));
  }
  if (bound == inf) return dt_max;
  return std::min(settings.cfl * bound, dt_max);
}

namespace {

double own_lipschitz(double v_out, const FluxModel& model) {
  return model.monotone() ? model.K() * std::max(v_out, 0.0) : model.K() * std::abs(v_out);
}

}  // namespace

double outward_velocity(const VelocityField& v, const StaggeredGrid& grid, int k) {
  const BoundaryFace& f = grid.boundary()[static_cast<std::size_t>(k)];
  if (f.side == Side::left || f.side == Side::right) return f.normal_x * v.vx[f.face];
  return f.normal_y * v.vy[f.face];
}

double monotone_dt_bound(const VelocityField& v, const BoundarySnapshot& b,
                         const FluxModel& model, const TransportSettings& settings,
                         const StaggeredGrid& grid) {
  const int nx = grid.nx(), ny = grid.ny();
  const double dx = grid.dx(), dy = grid.dy();
  const double eps = settings.epsilon;
  std::vector<double> c(static_cast<std::size_t>(grid.cell_count()), 0.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 1; i < nx; ++i) {
      const double vn = v.vx[grid.xface(i, j)];
      c[grid.cell(i - 1, j)] += dy * (own_lipschitz(vn, model) + eps / dx);
      c[grid.cell(i, j)] += dy * (own_lipschitz(-vn, model) + eps / dx);
    }
  }
  for (int j = 1; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double vn = v.vy[grid.yface(i, j)];
      c[grid.cell(i, j - 1)] += dx * (own_lipschitz(vn, model) + eps / dy);
      c[grid.cell(i, j)] += dx * (own_lipschitz(-vn, model) + eps / dy);
    }
  }
  for (int k = 0; k < grid.boundary_count(); ++k) {
    const BoundaryFace& f = grid.boundary()[k];
    const double vo = outward_velocity(v, grid, k);
    double add = own_lipschitz(vo, model);
    if (eps > 0.0 && vo >= 0.0) add += robin_coefficient(model, b.b_n[k]);
    c[f.cell] += f.length * add;
  }
  const double cmax = *std::max_element(c.begin(), c.end());
  if (!(cmax > 0.0)) return std::numeric_limits<double>::infinity();
  return grid.cell_area() / cmax;
}

double face_flux(double u_left, double u_right, double v_n, const FluxModel& model,
                 FluxScheme scheme) {
  if (v_n == 0.0) return 0.0;
  if (u_left == u_right) return v_n * model.g(u_left);
  if (scheme == FluxScheme::godunov && !model.monotone()) {
    // Godunov for f = v_n g: min of f over [a, b] if a <= b, else max over [b, a].
    const double lo = std::min(u_left, u_right), hi = std::max(u_left, u_right);
    const bool take_min = (u_left <= u_right) == (v_n > 0.0);
    return v_n * (take_min ? model.g_min(lo, hi) : model.g_max(lo, hi));
  }
  if (model.monotone()) return v_n > 0.0 ? v_n * model.g(u_left) : v_n * model.g(u_right);
  // Engquist-Osher splitting, written so that F(a, a) = v_n g(a) exactly.
  const double dl = model.g_decreasing_part(u_left);
  const double dr = model.g_decreasing_part(u_right);
  if (v_n > 0.0) return v_n * (model.g(u_left) + dr - dl);
  return v_n * (model.g(u_right) + dl - dr);
}

double interior_flux(double u_left, double u_right, double v_n, double distance,
                     const FluxModel& model, const TransportSettings& settings) {
  double f = face_flux(u_left, u_right, v_n, model, settings.scheme);
  if (settings.epsilon > 0.0) f -= settings.epsilon * (u_right - u_left) / distance;
  return f;
}

double boundary_flux(double u_in, double u_b, double v_out, double M, const FluxModel& model,
                     const TransportSettings& settings) {
  double f = face_flux(u_in, u_b, v_out, model, settings.scheme);
  if (settings.epsilon > 0.0 && v_out >= 0.0) f += M * (u_in - u_b);
  return f;
}

std::vector<double> step_saturation(std::span<const double> u, const VelocityField& v,
                                    const BoundarySnapshot& b, const FluxModel& model,
                                    const TransportSettings& settings, double dt,
                                    const StaggeredGrid& grid, StepStats* stats) {
  const int nx = grid.nx(), ny = grid.ny();
  const double dx = grid.dx(), dy = grid.dy();
  if (u.size() != static_cast<std::size_t>(grid.cell_count()))
    throw DomainError("saturation field does not match the grid");
  if (!(dt > 0.0)) throw DomainError("time step must be > 0");
  const double bound = monotone_dt_bound(v, b, model, settings, grid);
  if (dt > bound * (1.0 + 1e-12)) {
    throw CflError("time step " + std::to_string(dt) + " exceeds the monotone bound " +
                       std::to_string(bound),
                   bound);
  }

  std::vector<double> rhs(u.size(), 0.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 1; i < nx; ++i) {
      const int l = grid.cell(i - 1, j), r = grid.cell(i, j);
      const double F = interior_flux(u[l], u[r], v.vx[grid.xface(i, j)], dx, model, settings) * dy;
      rhs[l] -= F;
      rhs[r] += F;
    }
  }
  for (int j = 1; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int l = grid.cell(i, j - 1), r = grid.cell(i, j);
      const double F = interior_flux(u[l], u[r], v.vy[grid.yface(i, j)], dy, model, settings) * dx;
      rhs[l] -= F;
      rhs[r] += F;
    }
  }
  double adv = 0.0, diff = 0.0;
  for (int k = 0; k < grid.boundary_count(); ++k) {
    const BoundaryFace& f = grid.boundary()[k];
    const double vo = outward_velocity(v, grid, k);
    const double ui = u[f.cell];
    const double Fa = face_flux(ui, b.u_b[k], vo, model, settings.scheme);
    double Fd = 0.0;
    if (settings.epsilon > 0.0 && vo >= 0.0) Fd = robin_coefficient(model, b.b_n[k]) * (ui - b.u_b[k]);
    adv += Fa * f.length;
    diff += Fd * f.length;
    rhs[f.cell] -= (Fa + Fd) * f.length;
  }

  const double scale = dt / grid.cell_area();
  std::vector<double> out(u.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, clamp = 0.0;
  for (std::size_t c = 0; c < u.size(); ++c) {
    const double x = u[c] + scale * rhs[c];
    if (!std::isfinite(x)) {
      const int ci = static_cast<int>(c);
      throw NumericError("non-finite saturation in cell (" + std::to_string(ci % nx) + ", " +
                         std::to_string(ci / nx) + ")");
    }
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    const double y = std::clamp(x, 0.0, 1.0);
    clamp = std::max(clamp, std::abs(x - y));
    out[c] = y;
  }
  if (stats) {
    stats->pre_clamp_min = lo;
    stats->pre_clamp_max = hi;
    stats->clamp_magnitude = clamp;
    stats->boundary_advective_flux = adv;
    stats->boundary_diffusive_flux = diff;
    stats->dt_bound = bound;
  }
  return out;
}

std::vector<double> mollify_cells(std::span<const double> u, const StaggeredGrid& grid) {
  const int nx = grid.nx(), ny = grid.ny();
  static constexpr double w[3] = {0.5, 1.0, 0.5};
  std::vector<double> out(u.size());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double s = 0.0, ws = 0.0;
      for (int b = -1; b <= 1; ++b) {
        const int jj = j + b;
        if (jj < 0 || jj >= ny) continue;
        for (int a = -1; a <= 1; ++a) {
          const int ii = i + a;
          if (ii < 0 || ii >= nx) continue;
          const double wt = w[a + 1] * w[b + 1];
          s += wt * u[grid.cell(ii, jj)];
          ws += wt;
        }
      }
      out[grid.cell(i, j)] = s / ws;
    }
  }
  return out;
}

BoundarySnapshot mollify_boundary(const BoundarySnapshot& b, const StaggeredGrid& grid) {
  BoundarySnapshot out = b;
  const auto& faces = grid.boundary();
  const int n = static_cast<int>(faces.size());
  for (int k = 0; k < n; ++k) {
    double s = b.u_b[k], ws = 1.0;
    if (k > 0 && faces[k - 1].side == faces[k].side) {
      s += 0.5 * b.u_b[k - 1];
      ws += 0.5;
    }
    if (k + 1 < n && faces[k + 1].side == faces[k].side) {
      s += 0.5 * b.u_b[k + 1];
      ws += 0.5;
    }
    out.u_b[k] = s / ws;
  }
  return out;
}

RiemannSolution::RiemannSolution(const FluxModel& model, double u_left, double u_right)
    : model_(model), u_left_(u_left), u_right_(u_right) {
  if (!(u_left >= u_right)) throw DomainError("Riemann oracle requires u_L >= u_R");
  if (u_left == u_right) {
    u_star_ = u_left;
    return;
  }
  const double gr = model.g(u_right);
  auto phi = [&](double s) { return model.gprime(s) * (s - u_right) - (model.g(s) - gr); };
  const double chord = (model.g(u_left) - gr) / (u_left - u_right);
  if (model.gprime(u_left) >= chord - 1e-12) {
    // Whole jump is admissible as a single shock (or contact).
    u_star_ = u_left;
    shock_speed_ = chord;
    residual_ = 0.0;
    return;
  }
  // Tangent point: last sign change of phi from + to - on (u_R, u_L].
  const int n = 2000;
  double a = -1.0, b = -1.0;
  double prev_s = u_right + (u_left - u_right) / n;
  double prev = phi(prev_s);
  for (int k = 2; k <= n; ++k) {
    const double s = u_right + (u_left - u_right) * k / n;
    const double cur = phi(s);
    if (prev > 0.0 && cur <= 0.0) {
      a = prev_s;
      b = s;
    }
    prev = cur;
    prev_s = s;
  }
  if (a < 0.0) throw DomainError("Riemann oracle: tangency condition does not bracket");
  for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
    const double m = 0.5 * (a + b);
    if (phi(m) > 0.0) a = m; else b = m;
  }
  u_star_ = 0.5 * (a + b);
  shock_speed_ = (model.g(u_star_) - gr) / (u_star_ - u_right);
  residual_ = std::abs(shock_speed_ - model.gprime(u_star_));
}

double RiemannSolution::branch_state(double xi) const {
  if (u_star_ >= u_left_) return u_left_;
  if (xi <= model_.gprime(u_left_)) return u_left_;
  if (xi >= model_.gprime(u_star_)) return u_star_;
  double a = u_star_, b = u_left_;  // g' decreasing from a to b
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    const double m = 0.5 * (a + b);
    if (model_.gprime(m) > xi) a = m; else b = m;
  }
  return 0.5 * (a + b);
}

double RiemannSolution::concave_state(double xi) const {
  if (trivial()) return u_left_;
  constexpr int kScan = 2000;
  double a = u_right_, best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kScan; ++k) {
    const double u = u_right_ + (u_left_ - u_right_) * k / kScan;
    const double d = model_.gprime(u);
    if (d > best) {
      best = d;
      a = u;
    }
  }
  double b = u_left_;
  if (xi >= model_.gprime(a)) return a;
  if (xi <= model_.gprime(b)) return b;
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    const double m = 0.5 * (a + b);
    if (model_.gprime(m) > xi) a = m; else b = m;
  }
  return 0.5 * (a + b);
}

double RiemannSolution::sample(double xi) const {
  if (trivial()) return u_left_;
  if (xi > shock_speed_) return u_right_;
  return branch_state(xi);
}

RiemannSolution riemann_oracle(const FluxModel& model, double u_left, double u_right) {
  return RiemannSolution(model, u_left, u_right);
}

namespace {

double front_position(std::span<const double> u, const StaggeredGrid& g) {
  const int n = g.nx();
  int best = 0;
  double drop = -std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < n; ++i)
    if (u[i] - u[i + 1] > drop) {
      drop = u[i] - u[i + 1];
      best = i;
    }
  double w = 0.0, m = 0.0;
  for (int i = std::max(0, best - 4); i <= std::min(n - 2, best + 4); ++i) {
    const double d = std::max(0.0, u[i] - u[i + 1]);
    w += d;
    m += d * (i + 1) * g.dx();  // face between cells i and i+1
  }
  return w > 0.0 ? m / w : 0.0;
}

}  // namespace

RiemannRun riemann_run(const FluxModel& model, double u_left, double u_right, int nx, double t,
                       const TransportSettings& settings) {
  if (!(t > 0.0)) throw DomainError("Riemann run needs t > 0");
  const RiemannSolution exact(model, u_left, u_right);
  const StaggeredGrid g(nx, 1);
  const VelocityField v = VelocityField::uniform(g, 1.0, 0.0);
  BoundarySnapshot b;
  const int nb = g.boundary_count();
  b.u_b.assign(nb, u_right);
  b.b_n.assign(nb, 0.0);
  b.b_t.assign(nb, 0.0);
  for (int k = 0; k < nb; ++k) {
    const BoundaryFace& f = g.boundary()[k];
    if (f.side == Side::left) {
      b.b_n[k] = -1.0;
      b.u_b[k] = u_left;
    } else if (f.side == Side::right) {
      b.b_n[k] = 1.0;
    } else {
      b.b_t[k] = 1.0;
    }
  }
  std::vector<double> u(g.cell_count(), u_right);
  const double dt = std::min(stable_dt(v, model, settings, g),
                             monotone_dt_bound(v, b, model, settings, g));
  double now = 0.0, x_half = 0.0;
  const auto advance_to = [&](double target) {
    while (now < target * (1.0 - 1e-14)) {
      const double step = std::min(dt, target - now);
      u = step_saturation(u, v, b, model, settings, step, g);
      now += step;
    }
    now = target;
  };
  advance_to(0.5 * t);
  x_half = front_position(u, g);
  advance_to(t);

  RiemannRun r;
  r.nx = nx;
  r.t = t;
  r.shock_position = front_position(u, g);
  r.exact_position = exact.shock_speed() * t;
  r.measured_speed = (r.shock_position - x_half) / (0.5 * t);
  r.post_shock_state = exact.concave_state(r.measured_speed);
  r.exact_u_star = exact.u_star();
  r.tangency_residual = exact.tangency_residual();
  r.u = u;
  for (int i = 0; i < nx; ++i) {
    r.x.push_back(g.xc(i));
    r.u_exact.push_back(exact.sample(g.xc(i) / t));
  }
  return r;
}

}  // namespace blsim
