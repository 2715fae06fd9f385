#pragma once

// Run configuration files, CSV reports and raw field dumps.
//
// Config format: one `key = value` per line, '#' starts a comment, keys are
// dotted (grid.nx, fluid.tau, ...). Numbers are parsed without locale.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "blsim/driver.hpp"
#include "blsim/kinetic.hpp"

namespace blsim {

/// Parses and validates a config. Relative data paths resolve against
/// `base_dir`. Throws ConfigError carrying the offending line.
RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig parse_config(const std::filesystem::path& path);

/// Every key with its effective value; parse_config_text(echo) reproduces the config.
std::string echo_config(const RunConfig& config);

/// Shortest round-trip decimal form, '.' separator.
std::string format_double(double x);
/// Comma-separated list of doubles; throws ConfigError(line 0) on bad entries.
std::vector<double> parse_double_list(std::string_view text);

void write_text(const std::filesystem::path& path, const std::string& text);

void write_report_csv(const std::filesystem::path& path, const EnergyReport& report);
EnergyReport read_report_csv(const std::filesystem::path& path);

/// Raw little-endian float64.
void dump_field(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> load_field(const std::filesystem::path& path, std::size_t expected_count);

/// Writes config.txt, report.csv and fields/ (snapshots, plus every step when
/// the trajectory is dense).
void emit_run(const std::filesystem::path& outdir, const RunConfig& config,
              const Trajectory& traj);

/// Rebuilds a trajectory from a directory written by emit_run: snapshots
/// always, per-step states when they were dumped.
struct LoadedRun {
  RunConfig config;
  Trajectory traj;
};
LoadedRun load_run(const std::filesystem::path& outdir);

void write_epsilon_study(const std::filesystem::path& outdir, const EpsilonStudy& study);
void write_tau_study(const std::filesystem::path& outdir, const TauStudy& study);
void write_solver_trace_csv(const std::filesystem::path& path,
                            const std::vector<SolverTraceEntry>& trace);
void write_certificate_csv(const std::filesystem::path& path, const Certificate& cert);

/// (level, cell) arrays of time-integrated m+ and m- with a sidecar.
void dump_measures(const std::filesystem::path& dir, const StaggeredGrid& grid,
                   const std::vector<DefectMeasure>& measures);

}  // namespace blsim
