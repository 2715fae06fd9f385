// blsim: runs, parameter studies and verification checks from the command line.
//
// Exit codes: 0 all checks pass, 1 usage or configuration error, 2 numeric
// failure, 3 certification failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "blsim/driver.hpp"
#include "blsim/errors.hpp"
#include "blsim/io.hpp"
#include "blsim/kinetic.hpp"
#include "blsim/stokes.hpp"
#include "blsim/transport.hpp"

namespace fs = std::filesystem;
using namespace blsim;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumeric = 2;
constexpr int kCertification = 3;

std::vector<double> list_option(const std::string& text, const char* what) {
  try {
    return parse_double_list(text);
  } catch (const ConfigError&) {
    throw CLI::ValidationError(what, "expected a comma-separated list of numbers");
  }
}

int cmd_run(const fs::path& config_path, const fs::path& outdir, bool trace) {
  RunConfig cfg = parse_config(config_path);
  cfg.solver.trace = cfg.solver.trace || trace;
  try {
    const Trajectory traj = run(cfg);
    emit_run(outdir, cfg, traj);
    if (trace) write_solver_trace_csv(outdir / "solver_trace.csv", traj.solver_trace);
    const RunStats& s = traj.stats;
    std::printf("steps %d, velocity solves %d, max divergence %.3e, u in [%.6g, %.6g]\n", s.steps,
                s.velocity_solves, s.max_divergence, s.min_pre_clamp, s.max_pre_clamp);
  } catch (const RunAborted& e) {
    emit_run(outdir, cfg, e.partial());
    if (trace) write_solver_trace_csv(outdir / "solver_trace.csv", e.partial().solver_trace);
    std::fprintf(stderr, "%s\nlast valid state written to %s\n", e.what(), outdir.c_str());
    return kNumeric;
  }
  return kOk;
}

int cmd_study_epsilon(const fs::path& config_path, const std::string& eps, const fs::path& outdir) {
  const RunConfig cfg = parse_config(config_path);
  const EpsilonStudy study = epsilon_study(cfg, list_option(eps, "--eps"));
  write_epsilon_study(outdir, study);
  bool ok = true;
  for (const auto& r : study.rows) {
    std::printf("eps %-10g nx %-5d cauchy_L1 %-12.5g certified %d%s\n", r.epsilon, r.nx,
                r.cauchy_L1, r.certified ? 1 : 0, r.resolved ? "" : " (under-resolved)");
    ok = ok && r.certified;
  }
  for (const auto& w : study.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (study.rows.size() >= 3) {
    std::printf("cauchy strictly decreasing: %s, last/first = %.4g\n",
                study.cauchy_strictly_decreasing ? "yes" : "no", study.last_over_first);
    ok = ok && study.cauchy_strictly_decreasing;
  }
  return ok ? kOk : kCertification;
}

int cmd_study_tau(const fs::path& config_path, const std::string& taus, const fs::path& outdir) {
  const RunConfig cfg = parse_config(config_path);
  const TauStudy study = tau_study(cfg, list_option(taus, "--tau"));
  write_tau_study(outdir, study);
  for (const auto& r : study.rows)
    std::printf("tau %-10g D %-12.5g B_V1_max %-10.4g substeps %d\n", r.tau, r.D, r.B_V1_max,
                r.velocity_substeps);
  for (const auto& w : study.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (!study.slope) return kCertification;
  std::printf("slope %.4f over %d points\n", *study.slope, study.fit_points);
  return kOk;
}

int cmd_diagnose(const fs::path& dir, bool measures) {
  const LoadedRun loaded = load_run(dir);
  const Trajectory& traj = loaded.traj;
  if (!traj.dense) {
    std::fprintf(stderr, "%s holds snapshots only; rerun with run.dense = true\n", dir.c_str());
    return kUsage;
  }
  const VGrid vg = VGrid::standard();
  DiagnosticsObserver obs(traj.model, traj.transport, traj.T, vg, measures);
  replay(traj, obs);
  Certificate cert = obs.certificate();
  cert.append(indicator_certificate(build_kinetic(traj, vg)));
  write_certificate_csv(dir / "certificate.csv", cert);
  if (measures) dump_measures(dir / "measures", traj.grid, obs.entropy().measures());
  std::size_t failed = 0;
  for (const auto& r : cert.rows) failed += r.pass ? 0 : 1;
  std::printf("%zu checks, %zu failed\n", cert.rows.size(), failed);
  if (const CertificateRow* f = cert.first_failure())
    std::printf("first failure: %s at v = %g: %.6g vs bound %.6g %s\n", f->name.c_str(), f->v,
                f->value, f->bound, f->detail.c_str());
  return cert.ok() ? kOk : kCertification;
}

int cmd_riemann(double uL, double uR, int nx, double t, const std::string& config_path,
                const fs::path& outdir) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = parse_config(config_path);
  const RiemannRun r = riemann_run(cfg.model(), uL, uR, nx, t, cfg.transport);
  std::string csv = "x,u,u_exact\n";
  for (std::size_t i = 0; i < r.x.size(); ++i)
    csv += format_double(r.x[i]) + ',' + format_double(r.u[i]) + ',' + format_double(r.u_exact[i]) +
           '\n';
  write_text(outdir / "profile.csv", csv);
  const double dx = 1.0 / nx;
  const bool state_ok = std::abs(r.post_shock_state - r.exact_u_star) <= 0.01;
  const bool pos_ok = std::abs(r.shock_position - r.exact_position) <= 2.0 * dx;
  std::string sum;
  sum += "u_star = " + format_double(r.exact_u_star) + "\n";
  sum += "tangency_residual = " + format_double(r.tangency_residual) + "\n";
  sum += "post_shock_state = " + format_double(r.post_shock_state) + "\n";
  sum += "shock_position = " + format_double(r.shock_position) + "\n";
  sum += "exact_position = " + format_double(r.exact_position) + "\n";
  sum += "measured_speed = " + format_double(r.measured_speed) + "\n";
  write_text(outdir / "summary.txt", sum);
  std::fputs(sum.c_str(), stdout);
  return state_ok && pos_ok ? kOk : kCertification;
}

int cmd_model_report(const fs::path& config_path, const std::string& out) {
  const RunConfig cfg = parse_config(config_path);
  const FluxModel m = cfg.model();
  std::string csv = "u,g,h,gprime\n";
  for (int k = 0; k <= 1000; ++k) {
    const double u = k / 1000.0;
    csv += format_double(u) + ',' + format_double(m.g(u)) + ',' + format_double(m.h(u)) + ',' +
           format_double(m.gprime(u)) + '\n';
  }
  if (out.empty())
    std::fputs(csv.c_str(), stdout);
  else
    write_text(out, csv);
  std::fprintf(stderr, "K = %.10g, h0 = %.10g, monotone = %s\n", m.K(), m.h0(),
               m.monotone() ? "yes" : "no");
  return kOk;
}

int cmd_mms(const std::string& nxs, bool trace, const std::string& out) {
  std::vector<int> sizes;
  for (double x : list_option(nxs, "--nx")) {
    if (x != std::floor(x) || x < 4) throw CLI::ValidationError("--nx", "sizes must be integers >= 4");
    sizes.push_back(static_cast<int>(x));
  }
  SolverSettings s;
  s.trace = trace;
  std::string csv = "nx,velocity_l2_error,pressure_l2_error,iterations,rate\n";
  std::vector<MmsResult> rows;
  bool ok = true;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    rows.push_back(manufactured_error(sizes[k], 0.01, s));
    double rate = std::nan("");
    if (k > 0)
      rate = std::log(rows[k - 1].velocity_l2_error / rows[k].velocity_l2_error) /
             std::log(static_cast<double>(sizes[k]) / sizes[k - 1]);
    if (k > 0 && !(rate >= 1.7 && rate <= 2.3)) ok = false;
    std::printf("nx %-5d velocity L2 error %.4e pressure L2 error %.4e rate %.3f\n", sizes[k],
                rows[k].velocity_l2_error, rows[k].pressure_l2_error, rate);
    csv += std::to_string(sizes[k]) + ',' + format_double(rows[k].velocity_l2_error) + ',' +
           format_double(rows[k].pressure_l2_error) + ',' + std::to_string(rows[k].stats.iterations) +
           ',' + format_double(rate) + '\n';
  }
  if (!out.empty()) {
    write_text(fs::path(out) / "mms.csv", csv);
    if (trace) {
      std::vector<SolverTraceEntry> t;
      for (std::size_t k = 0; k < rows.size(); ++k)
        for (const auto& r : rows[k].stats.trace)
          t.push_back({static_cast<int>(k), r.iteration, r.momentum_residual, r.div_residual});
      write_solver_trace_csv(fs::path(out) / "solver_trace.csv", t);
    }
  }
  return ok ? kOk : kCertification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stokes-Buckley-Leverett simulator and verification suite"};
  app.require_subcommand(1);
  app.fallthrough();
  bool trace = false;
  app.add_flag("--trace-solver", trace, "write solver_trace.csv (solve, iteration, residuals)");

  std::string config, outdir = "out", eps, taus, dir, nxs = "32,64,128", out, rconfig;
  double uL = 1.0, uR = 0.0, t_end = 0.25;
  int rnx = 512;
  bool measures = false;

  auto* run_cmd = app.add_subcommand("run", "run one configuration");
  run_cmd->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--out", outdir, "output directory");

  auto* se = app.add_subcommand("study-epsilon", "vanishing-viscosity study");
  se->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  se->add_option("--eps", eps, "epsilon values, largest first")->required();
  se->add_option("-o,--out", outdir, "output directory");

  auto* st = app.add_subcommand("study-tau", "time-delay study");
  st->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  st->add_option("--tau", taus, "tau values")->required();
  st->add_option("-o,--out", outdir, "output directory");

  auto* dg = app.add_subcommand("diagnose", "kinetic certificate of a dense run directory");
  dg->add_option("dir", dir, "run output directory")->required()->check(CLI::ExistingDirectory);
  dg->add_flag("--measures", measures, "dump time-integrated m+ and m- per cell");

  auto* rm = app.add_subcommand("riemann", "1-D Riemann problem against the exact solution");
  rm->add_option("--uL", uL, "left state");
  rm->add_option("--uR", uR, "right state");
  rm->add_option("--nx", rnx, "cells")->check(CLI::PositiveNumber);
  rm->add_option("--t", t_end, "final time")->check(CLI::PositiveNumber);
  rm->add_option("--config", rconfig, "config supplying the flux model")->check(CLI::ExistingFile);
  rm->add_option("-o,--out", outdir, "output directory");

  auto* mr = app.add_subcommand("model-report", "tabulate g, h, g' at 1001 points");
  mr->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  mr->add_option("-o,--out", out, "CSV file (stdout when omitted)");

  auto* mm = app.add_subcommand("mms", "manufactured-solution rate of the Brinkman solver");
  mm->add_option("--nx", nxs, "grid sizes");
  mm->add_option("-o,--out", out, "output directory for mms.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(config, outdir, trace);
    if (*se) return cmd_study_epsilon(config, eps, outdir);
    if (*st) return cmd_study_tau(config, taus, outdir);
    if (*dg) return cmd_diagnose(dir, measures);
    if (*rm) return cmd_riemann(uL, uR, rnx, t_end, rconfig, outdir);
    if (*mr) return cmd_model_report(config, out);
    if (*mm) return cmd_mms(nxs, trace, out);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kUsage;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kNumeric;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
