#include "blsim/driver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "blsim/errors.hpp"

namespace blsim {

SplitOrder parse_split_order(std::string_view text) {
  if (text == "velocity_first") return SplitOrder::velocity_first;
  if (text == "saturation_first") return SplitOrder::saturation_first;
  throw DomainError("unknown split order '" + std::string(text) + "'");
}

std::string_view to_string(SplitOrder order) {
  return order == SplitOrder::velocity_first ? "velocity_first" : "saturation_first";
}

void RunConfig::validate() const {
  (void)grid();
  fluid.validate();
  relperm.validate();
  transport.validate();
  solver.validate();
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("run.T must be > 0");
  if (!(output_interval >= 0.0)) throw DomainError("run.output_interval must be >= 0");
  if (!(dt_max > 0.0)) throw DomainError("run.dt_max must be > 0");
  if (max_steps < 0) throw DomainError("run.max_steps must be >= 0");
  if (picard_iterations < 0 || picard_iterations > 5)
    throw DomainError("run.picard_iterations must lie in [0, 5]");
  if (samples < 1) throw DomainError("study.samples must be >= 1");
  if (!boundary_csv.empty() && boundary_times.empty())
    throw DomainError("data.boundary_times is required with data.boundary_csv");
}

StaggeredGrid RunConfig::grid() const { return StaggeredGrid(nx, ny == 0 ? nx : ny, Lx, Ly); }

FluxModel RunConfig::model() const { return FluxModel(fluid, relperm, flux_mode); }

ProblemData RunConfig::problem() const {
  const StaggeredGrid g = grid();
  PresetParams params = preset_params;
  params.seed = seed;
  ProblemData data = make_preset(preset, g, params);
  if (!boundary_csv.empty()) data.boundary = load_boundary_csv(boundary_csv, g, boundary_times);
  if (transport.mollify_data) {
    data.u0 = mollify_cells(data.u0, g);
    for (auto& level : data.boundary.levels) level = mollify_boundary(level, g);
  }
  return data;
}

void replay(const Trajectory& traj, StepObserver& observer) {
  if (!traj.dense) throw DomainError("trajectory is not dense; diagnostics need every step");
  observer.begin(traj.grid, traj.u0, 0.0);
  std::vector<double> u_old = traj.u0;
  VelocityField v = VelocityField::zeros(traj.grid);
  for (std::size_t n = 0; n < traj.steps.size(); ++n) {
    const DenseStep& s = traj.steps[n];
    v.vx = s.vx;
    v.vy = s.vy;
    const BoundarySnapshot b = traj.boundary.at(s.t_boundary);
    StepView view;
    view.index = static_cast<int>(n);
    view.t_old = s.t_old;
    view.t_new = s.t_new;
    view.u_old = u_old;
    view.u_new = s.u;
    view.v = &v;
    view.b = &b;
    observer.step(view);
    u_old = s.u;
  }
  observer.end(u_old, traj.steps.empty() ? 0.0 : traj.steps.back().t_new);
}

double grad_norm_sq(std::span<const double> u, const StaggeredGrid& grid) {
  const int nx = grid.nx(), ny = grid.ny();
  const double wx = grid.dy() / grid.dx(), wy = grid.dx() / grid.dy();
  double s = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const double d = u[grid.cell(i + 1, j)] - u[grid.cell(i, j)];
      s += wx * d * d;
    }
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double d = u[grid.cell(i, j + 1)] - u[grid.cell(i, j)];
      s += wy * d * d;
    }
  return s;
}

namespace {

std::vector<double> damping(const FluxModel& model, std::span<const double> u) {
  std::vector<double> h(u.size());
  for (std::size_t c = 0; c < u.size(); ++c) h[c] = model.h(u[c]);
  return h;
}

struct SubstepRecord {
  double t_old, t_new;
  VelocityField v;
  BoundarySnapshot b;
};

class Runner {
public:
  Runner(const RunConfig& cfg, const ProblemData& data, const RunHooks& hooks, bool unsteady)
      : cfg_(cfg), hooks_(hooks), unsteady_(unsteady), grid_(cfg.grid()), model_(cfg.model()),
        solver_(grid_, cfg.fluid.nu, cfg.solver), traj_(grid_, model_) {
    cfg.validate();
    traj_.transport = cfg.transport;
    traj_.tau = unsteady ? cfg.fluid.tau : 0.0;
    traj_.T = cfg.T;
    traj_.boundary = data.boundary;
    traj_.u0 = data.u0;
    traj_.dense = cfg.dense;
    tau_ = traj_.tau;
    layer_dt_ = tau_ / 100.0;
  }

  Trajectory run(const std::optional<VelocityField>& v0) {
    const BoundarySnapshot b0 = traj_.boundary.at(0.0);
    u_ = traj_.u0;
    const std::vector<double> h0 = damping(model_, u_);
    if (unsteady_) {
      if (v0) {
        v_ = *v0;
      } else {
        SolveStats st;
        v_ = solver_.solve_lifting(b0, &st).v;
        note_solve(st);
      }
    } else {
      SolveStats st;
      v_ = solver_.solve_quasi_stationary(h0, b0, nullptr, &st);
      note_solve(st);
    }
    InitialData init{u_, unsteady_ ? std::optional<VelocityField>(v_) : std::nullopt};
    const ValidationReport rep =
        validate_data(grid_, traj_.boundary, init, tau_, 10.0 * cfg_.solver.tolerance);
    if (!rep.ok()) throw DomainError("data refused: " + rep.summary());

    for (auto* o : hooks_.step_observers) o->begin(grid_, u_, 0.0);
    sup_v_ = std::sqrt(tau_) * velocity_l2(v_, grid_);
    record(0.0);

    const double interval = cfg_.output_interval > 0.0 ? cfg_.output_interval : cfg_.T / 10.0;
    int next_out = 1;
    double t = 0.0;
    int step = 0;
    try {
      while (t < cfg_.T * (1.0 - 1e-14)) {
        if (cfg_.max_steps > 0 && step >= cfg_.max_steps) {
          if (traj_.snapshots.back().t != t) record(t);
          break;
        }
        const double t_out = std::min(cfg_.T, next_out * interval);
        advance(t, t_out, step);
        if (std::abs(t - t_out) <= 1e-12 * cfg_.T) {
          t = t_out;
          record(t);
          ++next_out;
        }
        ++step;
      }
    } catch (const RunAborted&) {
      throw;
    } catch (const NumericError& e) {
      abort(e.what(), t, step);
    } catch (const SolverError& e) {
      abort(e.what(), t, step);
    }
    for (auto* o : hooks_.step_observers) o->end(u_, t);
    traj_.stats.steps = step;
    return std::move(traj_);
  }

private:
  [[noreturn]] void abort(const std::string& what, double t, int step) {
    record(t);
    traj_.stats.steps = step;
    std::ostringstream os;
    os << "run aborted at t = " << t << " (step " << step << "): " << what;
    throw RunAborted(os.str(), t, std::make_shared<const Trajectory>(std::move(traj_)));
  }

  void note_solve(const SolveStats& st) {
    for (const auto& row : st.trace)
      traj_.solver_trace.push_back(
          {traj_.stats.velocity_solves, row.iteration, row.momentum_residual, row.div_residual});
    traj_.stats.velocity_solves++;
    traj_.stats.max_solver_iterations = std::max(traj_.stats.max_solver_iterations, st.iterations);
    traj_.stats.max_divergence = std::max(traj_.stats.max_divergence, st.max_div);
  }

  void record(double t) {
    Snapshot s;
    s.t = t;
    s.u = u_;
    s.v = v_;
    traj_.snapshots.push_back(std::move(s));
    EnergyRow r;
    r.t = t;
    r.min_u = *std::min_element(u_.begin(), u_.end());
    r.max_u = *std::max_element(u_.begin(), u_.end());
    r.sqrt_tau_v_L2 = sup_v_;
    r.v_L2V1_running = std::sqrt(v_l2v1_sq_);
    r.eps_gradu_running = cfg_.transport.epsilon * grad_sq_int_;
    r.vneg1_proxy = tau_ * std::sqrt(dtv_dual_sq_);
    traj_.report.rows.push_back(r);
  }

  // Velocity over [t, t + dt] with damping h; substeps recorded, not yet emitted.
  VelocityField velocity(const VelocityField& start, std::span<const double> h, double t,
                         double dt, std::vector<SubstepRecord>& subs, double& layer_dt) {
    subs.clear();
    if (!unsteady_) {
      const BoundarySnapshot b = traj_.boundary.at(t + dt);
      SolveStats st;
      VelocityField v = solver_.solve_quasi_stationary(h, b, nullptr, &st, &start.p);
      note_solve(st);
      subs.push_back({t, t + dt, v, b});
      return v;
    }
    VelocityField v = start;
    double tt = t;
    const double t_end = t + dt;
    while (tt < t_end) {
      double sub = t_end - tt;
      if (hooks_.graded_initial_layer && layer_dt < sub * (1.0 - 1e-12)) {
        sub = layer_dt;
        layer_dt *= 1.2;
      }
      const double tn = (t_end - tt - sub <= 1e-14 * std::max(1.0, t_end)) ? t_end : tt + sub;
      const BoundarySnapshot b = traj_.boundary.at(tn);
      SolveStats st;
      v = solver_.step_unsteady(v, h, b, tau_, tn - tt, &st);
      note_solve(st);
      subs.push_back({tt, tn, v, b});
      tt = tn;
    }
    return v;
  }

  void advance(double& t, double t_out, int step) {
    const double cap = std::isfinite(cfg_.dt_max) ? cfg_.dt_max : (t_out - t);
    const BoundarySnapshot b_now = traj_.boundary.at(t);
    double dt = stable_dt(v_, model_, cfg_.transport, grid_, cap);
    dt = std::min({dt, cfg_.dt_max, t_out - t});
    dt = std::min(dt, monotone_dt_bound(v_, b_now, model_, cfg_.transport, grid_));
    if (!(dt > 0.0)) throw NumericError("time step collapsed to zero");

    const std::vector<double> h = damping(model_, u_);
    std::vector<SubstepRecord> subs;
    std::vector<double> h_vel;  // damping behind the accepted substeps
    std::vector<double> u_new;
    VelocityField v_new;
    VelocityField v_transport;
    BoundarySnapshot b_transport;
    StepStats ss;
    const double layer_saved = layer_dt_;
    for (int attempt = 0;; ++attempt) {
      double layer = layer_saved;
      if (cfg_.order == SplitOrder::velocity_first) {
        v_new = velocity(v_, h, t, dt, subs, layer);
        h_vel = h;
        b_transport = traj_.boundary.at(t + dt);
        const double bound = monotone_dt_bound(v_new, b_transport, model_, cfg_.transport, grid_);
        if (dt > bound) {
          if (attempt >= 30) throw CflError("no admissible time step found", bound);
          dt = 0.9 * bound;
          continue;
        }
        v_transport = v_new;
        u_new = step_saturation(u_, v_new, b_transport, model_, cfg_.transport, dt, grid_, &ss);
        for (int it = 0; it < cfg_.picard_iterations; ++it) {
          double lay = layer_saved;
          const std::vector<double> hk = damping(model_, u_new);
          VelocityField vk = velocity(v_, hk, t, dt, subs, lay);
          if (dt > monotone_dt_bound(vk, b_transport, model_, cfg_.transport, grid_)) break;
          h_vel = hk;
          std::vector<double> uk =
              step_saturation(u_, vk, b_transport, model_, cfg_.transport, dt, grid_, &ss);
          double diff = 0.0;
          for (std::size_t c = 0; c < uk.size(); ++c) diff = std::max(diff, std::abs(uk[c] - u_new[c]));
          u_new = std::move(uk);
          v_new = vk;
          v_transport = std::move(vk);
          layer = lay;
          if (diff <= 1e-8) break;
        }
      } else {
        b_transport = b_now;
        v_transport = v_;
        u_new = step_saturation(u_, v_, b_now, model_, cfg_.transport, dt, grid_, &ss);
        const std::vector<double> hn = damping(model_, u_new);
        v_new = velocity(v_, hn, t, dt, subs, layer);
        h_vel = hn;
      }
      layer_dt_ = layer;
      break;
    }

    // Energy bookkeeping over the velocity substeps.
    const VelocityField* prev = &v_;
    for (const auto& s : subs) {
      const double d = s.t_new - s.t_old;
      const double n1 = velocity_h1(s.v, grid_);
      v_l2v1_sq_ += d * n1 * n1;
      sup_v_ = std::max(sup_v_, std::sqrt(tau_) * velocity_l2(s.v, grid_));
      if (unsteady_) {
        VelocityField diff = difference(s.v, *prev);
        for (double& x : diff.vx) x /= d;
        for (double& y : diff.vy) y /= d;
        const double q = solver_.dual_norm_proxy(diff);
        dtv_dual_sq_ += d * q * q;
      }
      if (!hooks_.velocity_observers.empty()) {
        VelocityView vv;
        vv.t_old = s.t_old;
        vv.t_new = s.t_new;
        vv.v_old = prev;
        vv.v_new = &s.v;
        vv.h = h_vel;
        vv.b = &s.b;
        for (auto* o : hooks_.velocity_observers) o->substep(vv);
      }
      prev = &s.v;
    }
    grad_sq_int_ += dt * grad_norm_sq(u_new, grid_);

    RunStats& rs = traj_.stats;
    rs.min_pre_clamp = std::min(rs.min_pre_clamp, ss.pre_clamp_min);
    rs.max_pre_clamp = std::max(rs.max_pre_clamp, ss.pre_clamp_max);
    rs.max_clamp = std::max(rs.max_clamp, ss.clamp_magnitude);
    rs.min_dt = std::min(rs.min_dt, dt);
    rs.max_dt = std::max(rs.max_dt, dt);
    {
      double m_old = 0.0, m_new = 0.0;
      for (std::size_t c = 0; c < u_.size(); ++c) {
        m_old += u_[c];
        m_new += u_new[c];
      }
      const double area = grid_.cell_area();
      const double flux = dt * (ss.boundary_advective_flux + ss.boundary_diffusive_flux);
      const double defect = std::abs((m_new - m_old) * area + flux);
      const double scale = std::max({m_old * area, std::abs(flux), 1e-300});
      rs.max_conservation_defect = std::max(rs.max_conservation_defect, defect / scale);
    }

    StepView view;
    view.index = step;
    view.t_old = t;
    view.t_new = t + dt;
    view.u_old = u_;
    view.u_new = u_new;
    view.v = &v_transport;
    view.b = &b_transport;
    for (auto* o : hooks_.step_observers) o->step(view);

    if (traj_.dense) {
      DenseStep d;
      d.t_old = t;
      d.t_new = t + dt;
      d.t_boundary = cfg_.order == SplitOrder::velocity_first ? t + dt : t;
      d.u = u_new;
      d.vx = v_transport.vx;
      d.vy = v_transport.vy;
      traj_.steps.push_back(std::move(d));
    }
    u_ = std::move(u_new);
    v_ = std::move(v_new);
    t += dt;
    if (t_out - t <= 1e-12 * cfg_.T) t = t_out;
  }

  const RunConfig& cfg_;
  const RunHooks& hooks_;
  bool unsteady_;
  StaggeredGrid grid_;
  FluxModel model_;
  StokesBrinkman solver_;
  Trajectory traj_;
  double tau_ = 0.0;
  double layer_dt_ = 0.0;
  std::vector<double> u_;
  VelocityField v_;
  double sup_v_ = 0.0;
  double v_l2v1_sq_ = 0.0;
  double grad_sq_int_ = 0.0;
  double dtv_dual_sq_ = 0.0;
};

}  // namespace

Trajectory run_ibvp_tau(const RunConfig& config, const ProblemData& data,
                        const std::optional<VelocityField>& v0, const RunHooks& hooks) {
  if (!(config.fluid.tau > 0.0)) throw DomainError("run_ibvp_tau needs tau > 0");
  Runner r(config, data, hooks, true);
  return r.run(v0);
}

Trajectory run_ibvp_tau(const RunConfig& config) { return run_ibvp_tau(config, config.problem()); }

Trajectory run_ibvp_stationary(const RunConfig& config, const ProblemData& data,
                               const RunHooks& hooks) {
  Runner r(config, data, hooks, false);
  return r.run(std::nullopt);
}

Trajectory run_ibvp_stationary(const RunConfig& config) {
  return run_ibvp_stationary(config, config.problem());
}

Trajectory run(const RunConfig& config, const RunHooks& hooks) {
  const ProblemData data = config.problem();
  if (config.fluid.tau > 0.0) return run_ibvp_tau(config, data, std::nullopt, hooks);
  return run_ibvp_stationary(config, data, hooks);
}

std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw DomainError("line fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("line fit needs distinct abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

namespace {

// Average a fine cell field onto a grid coarser by integer factors.
std::vector<double> restrict_to(const std::vector<double>& u, const StaggeredGrid& fine,
                                const StaggeredGrid& coarse) {
  if (fine == coarse) return u;
  if (fine.nx() % coarse.nx() != 0 || fine.ny() % coarse.ny() != 0)
    throw DomainError("epsilon study grids are not nested");
  const int rx = fine.nx() / coarse.nx(), ry = fine.ny() / coarse.ny();
  std::vector<double> out(static_cast<std::size_t>(coarse.cell_count()), 0.0);
  for (int j = 0; j < fine.ny(); ++j)
    for (int i = 0; i < fine.nx(); ++i)
      out[coarse.cell(i / rx, j / ry)] += u[fine.cell(i, j)] / (rx * ry);
  return out;
}

double max_speed(const Trajectory& t) {
  double m = 0.0;
  for (const auto& s : t.snapshots) m = std::max({m, max_abs(s.v.vx), max_abs(s.v.vy)});
  return m;
}

}  // namespace

EpsilonStudy epsilon_study(const RunConfig& config, const std::vector<double>& epsilons) {
  if (epsilons.empty()) throw DomainError("epsilon study needs at least one value");
  EpsilonStudy study;
  if (epsilons.size() < 3)
    study.warnings.push_back("fewer than three epsilon values: bound checks only");
  for (std::size_t k = 1; k < epsilons.size(); ++k)
    if (!(epsilons[k] < epsilons[k - 1])) study.warnings.push_back("epsilons are not decreasing");

  std::vector<Trajectory> runs;
  const VGrid vg = VGrid::standard();
  for (double eps : epsilons) {
    RunConfig cfg = config;
    cfg.transport.epsilon = eps;
    cfg.output_interval = config.T / config.samples;
    cfg.dense = false;
    if (config.refine_grid) {
      const double r = epsilons.front() / eps;
      cfg.nx = static_cast<int>(std::lround(config.nx * r));
      const int ny0 = config.ny == 0 ? config.nx : config.ny;
      cfg.ny = ny0 == 1 ? 1 : static_cast<int>(std::lround(ny0 * r));
    }
    const FluxModel model = cfg.model();
    EntropyAccumulator acc(model, cfg.transport, vg.v);
    RunHooks hooks;
    hooks.step_observers.push_back(&acc);
    Trajectory tr = run(cfg, hooks);

    EpsilonStudyRow row;
    row.epsilon = eps;
    row.nx = tr.grid.nx();
    row.ny = tr.grid.ny();
    const double vmax = max_speed(tr);
    row.resolved = eps >= tr.grid.dx() * vmax * model.K();
    if (!row.resolved) {
      std::ostringstream os;
      os << "epsilon " << eps << " is below dx*max|v|*K = " << tr.grid.dx() * vmax * model.K();
      study.warnings.push_back(os.str());
    }
    const EnergyRow& last = tr.report.rows.back();
    row.eps_gradu = last.eps_gradu_running;
    row.sqrt_tau_v_L2 = last.sqrt_tau_v_L2;
    row.v_L2V1 = last.v_L2V1_running;
    row.vneg1_proxy = last.vneg1_proxy;
    row.min_u = last.min_u;
    row.max_u = last.max_u;
    row.steps = tr.stats.steps;
    row.min_m_density = std::numeric_limits<double>::infinity();
    row.min_m_estimate_margin = std::numeric_limits<double>::infinity();
    bool ok = true;
    const double tol_m = 1e-10 * acc.scheme_scale();
    for (const auto& m : acc.measures()) {
      row.min_m_density = std::min({row.min_m_density, m.min_plus_density, m.min_minus_density});
      const MEstimateResult e = m_estimate_check(m);
      row.min_m_estimate_margin =
          std::min({row.min_m_estimate_margin, e.margin_plus, e.margin_minus});
      ok = ok && e.pass && m.min_plus_density >= -tol_m && m.min_minus_density >= -tol_m;
    }
    row.certified = ok;
    row.report = tr.report;
    study.rows.push_back(row);
    runs.push_back(std::move(tr));
  }

  for (std::size_t k = 0; k + 1 < runs.size(); ++k) {
    const Trajectory& a = runs[k];
    const Trajectory& b = runs[k + 1];
    const StaggeredGrid& coarse = a.grid.cell_count() <= b.grid.cell_count() ? a.grid : b.grid;
    if (a.snapshots.size() != b.snapshots.size())
      throw NumericError("epsilon runs produced different sample times");
    const std::size_t ns = a.snapshots.size();
    double total = 0.0;
    for (std::size_t m = 0; m < ns; ++m) {
      const auto ua = restrict_to(a.snapshots[m].u, a.grid, coarse);
      const auto ub = restrict_to(b.snapshots[m].u, b.grid, coarse);
      double s = 0.0;
      for (std::size_t c = 0; c < ua.size(); ++c) s += std::abs(ua[c] - ub[c]);
      s *= coarse.cell_area();
      double w = 0.0;
      if (m > 0) w += 0.5 * (a.snapshots[m].t - a.snapshots[m - 1].t);
      if (m + 1 < ns) w += 0.5 * (a.snapshots[m + 1].t - a.snapshots[m].t);
      total += w * s;
    }
    study.rows[k].cauchy_L1 = total;
  }
  if (runs.size() >= 3) {
    bool dec = true;
    for (std::size_t k = 1; k + 1 < runs.size(); ++k)
      dec = dec && study.rows[k].cauchy_L1 < study.rows[k - 1].cauchy_L1;
    study.cauchy_strictly_decreasing = dec;
    study.last_over_first = study.rows[runs.size() - 2].cauchy_L1 / study.rows[0].cauchy_L1;
  }
  return study;
}

namespace {

// Tracks |v - B|^2 along the velocity substeps of a tau-run.
class TauObserver : public VelocityObserver {
public:
  TauObserver(const StaggeredGrid& grid, double nu, const SolverSettings& s)
      : grid_(grid), solver_(grid, nu, s) {}

  void substep(const VelocityView& s) override {
    ++substeps_;
    const bool same = have_ && s.h.size() == h_.size() &&
                      std::equal(s.h.begin(), s.h.end(), h_.begin()) && b_.b_n == s.b->b_n &&
                      b_.b_t == s.b->b_t;
    if (!same) {
      VelocityField Bn = solver_.solve_B_tau(s.h, *s.b);
      if (have_ && s.t_new > tB_) {
        const double d = velocity_h1(difference(Bn, B_), grid_) / (s.t_new - tB_);
        dtB_max = std::max(dtB_max, d);
      }
      B_ = std::move(Bn);
      tB_ = s.t_new;
      h_.assign(s.h.begin(), s.h.end());
      b_ = *s.b;
      have_ = true;
      B_max = std::max(B_max, velocity_h1(B_, grid_));
    }
    const double e = velocity_h1(difference(*s.v_new, B_), grid_);
    D += (s.t_new - s.t_old) * e * e;
  }

  double D = 0.0, B_max = 0.0, dtB_max = 0.0;
  int substeps_ = 0;

private:
  StaggeredGrid grid_;
  StokesBrinkman solver_;
  bool have_ = false;
  std::vector<double> h_;
  BoundarySnapshot b_;
  VelocityField B_;
  double tB_ = 0.0;
};

}  // namespace

TauStudy tau_study(const RunConfig& config, const std::vector<double>& taus) {
  if (taus.empty()) throw DomainError("tau study needs at least one value");
  TauStudy study;
  if (taus.size() < 4) study.warnings.push_back("fewer than four tau values");
  {
    const auto [lo, hi] = std::minmax_element(taus.begin(), taus.end());
    if (*lo > 0.0 && *hi / *lo < 1e3 * (1.0 - 1e-12))
      study.warnings.push_back("tau values span less than three decades");
  }
  const ProblemData data = config.problem();
  std::vector<double> lx, ly;
  for (double tau : taus) {
    RunConfig cfg = config;
    cfg.fluid.tau = tau;
    cfg.dense = false;
    TauObserver obs(cfg.grid(), cfg.fluid.nu, cfg.solver);
    RunHooks hooks;
    hooks.velocity_observers.push_back(&obs);
    Trajectory tr = run_ibvp_tau(cfg, data, std::nullopt, hooks);
    TauStudyRow row;
    row.tau = tau;
    row.D = obs.D;
    row.B_V1_max = obs.B_max;
    row.dtB_max = obs.dtB_max;
    const EnergyRow& last = tr.report.rows.back();
    row.sqrt_tau_v_L2 = last.sqrt_tau_v_L2;
    row.v_L2V1 = last.v_L2V1_running;
    row.vneg1_proxy = last.vneg1_proxy;
    row.eps_gradu = last.eps_gradu_running;
    row.min_u = last.min_u;
    row.max_u = last.max_u;
    row.steps = tr.stats.steps;
    row.velocity_substeps = obs.substeps_;
    row.report = tr.report;
    study.rows.push_back(row);
    if (row.D > 0.0 && std::isfinite(row.D)) {
      lx.push_back(std::log(tau));
      ly.push_back(std::log(row.D));
    }
  }
  study.fit_points = static_cast<int>(lx.size());
  if (lx.size() >= 2) {
    const auto [s, c] = fit_line(lx, ly);
    study.slope = s;
    study.intercept = c;
  } else {
    study.warnings.push_back("fewer than two usable points: no slope fitted");
  }
  return study;
}

}  // namespace blsim
