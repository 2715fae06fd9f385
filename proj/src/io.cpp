#include "blsim/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "blsim/errors.hpp"

namespace blsim {

namespace fs = std::filesystem;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view text, int line, std::string_view key) {
  text = trim(text);
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  double x = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto r = std::from_chars(first, text.data() + text.size(), x);
  if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size() || std::isnan(x))
    throw ConfigError(std::string(key) + ": malformed number '" + std::string(text) + "'", line);
  return x;
}

long long to_integer(std::string_view text, int line, std::string_view key) {
  text = trim(text);
  long long x = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), x);
  if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size())
    throw ConfigError(std::string(key) + ": malformed integer '" + std::string(text) + "'", line);
  return x;
}

int to_int(std::string_view text, int line, std::string_view key) {
  const long long x = to_integer(text, line, key);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError(std::string(key) + ": integer out of range", line);
  return static_cast<int>(x);
}

bool to_bool(std::string_view text, int line, std::string_view key) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'",
                    line);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? p : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

std::string join(const std::vector<double>& xs, char sep) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += sep;
    s += format_double(xs[i]);
  }
  return s;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, std::string_view, int, const fs::path&)> set;
  std::function<std::string(const RunConfig&)> get;  // empty result: omitted from the echo
};

template <typename F>
Key real(const char* name, F member) {
  return {name,
          [name, member](RunConfig& c, std::string_view v, int line, const fs::path&) {
            member(c) = to_double(v, line, name);
          },
          [member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); }};
}

template <typename F>
Key integer(const char* name, F member) {
  return {name,
          [name, member](RunConfig& c, std::string_view v, int line, const fs::path&) {
            member(c) = to_int(v, line, name);
          },
          [member](const RunConfig& c) {
            return std::to_string(member(const_cast<RunConfig&>(c)));
          }};
}

template <typename F>
Key boolean(const char* name, F member) {
  return {name,
          [name, member](RunConfig& c, std::string_view v, int line, const fs::path&) {
            member(c) = to_bool(v, line, name);
          },
          [member](const RunConfig& c) {
            return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <typename Parse>
auto wrap(const char* name, Parse parse) {
  return [name, parse](std::string_view v, int line) {
    try {
      return parse(trim(v));
    } catch (const DomainError& e) {
      throw ConfigError(std::string(name) + ": " + e.what(), line);
    }
  };
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = [] {
    std::vector<Key> t;
    t.push_back(integer("grid.nx", [](RunConfig& c) -> int& { return c.nx; }));
    t.push_back(integer("grid.ny", [](RunConfig& c) -> int& { return c.ny; }));
    t.push_back(real("grid.Lx", [](RunConfig& c) -> double& { return c.Lx; }));
    t.push_back(real("grid.Ly", [](RunConfig& c) -> double& { return c.Ly; }));
    t.push_back(real("fluid.mu1", [](RunConfig& c) -> double& { return c.fluid.mu1; }));
    t.push_back(real("fluid.mu2", [](RunConfig& c) -> double& { return c.fluid.mu2; }));
    t.push_back(real("fluid.nu", [](RunConfig& c) -> double& { return c.fluid.nu; }));
    t.push_back(real("fluid.tau", [](RunConfig& c) -> double& { return c.fluid.tau; }));
    t.push_back({"rel_perm.kind",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   c.relperm.kind = wrap("rel_perm.kind", parse_relperm_kind)(v, line);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.relperm.kind)); }});
    t.push_back(real("rel_perm.exponent", [](RunConfig& c) -> double& { return c.relperm.exponent; }));
    t.push_back(real("rel_perm.k_reg", [](RunConfig& c) -> double& { return c.relperm.k_reg; }));
    t.push_back({"rel_perm.table",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   c.relperm.table.clear();
                   for (std::string_view row : split(v, ';')) {
                     if (row.empty()) continue;
                     const auto cols = split(row, ',');
                     if (cols.size() != 3)
                       throw ConfigError("rel_perm.table: rows are 's,kr1,kr2' separated by ';'",
                                         line);
                     c.relperm.table.push_back({to_double(cols[0], line, "rel_perm.table"),
                                                to_double(cols[1], line, "rel_perm.table"),
                                                to_double(cols[2], line, "rel_perm.table")});
                   }
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (const auto& r : c.relperm.table) {
                     if (!s.empty()) s += ';';
                     s += format_double(r[0]) + ',' + format_double(r[1]) + ',' + format_double(r[2]);
                   }
                   return s;
                 }});
    t.push_back({"flux.mode",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   c.flux_mode = wrap("flux.mode", parse_flux_mode)(v, line);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.flux_mode)); }});
    t.push_back(real("transport.epsilon", [](RunConfig& c) -> double& { return c.transport.epsilon; }));
    t.push_back(real("transport.cfl", [](RunConfig& c) -> double& { return c.transport.cfl; }));
    t.push_back({"transport.scheme",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   c.transport.scheme = wrap("transport.scheme", parse_flux_scheme)(v, line);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.transport.scheme)); }});
    t.push_back(boolean("transport.mollify_data",
                        [](RunConfig& c) -> bool& { return c.transport.mollify_data; }));
    t.push_back(real("solver.tolerance", [](RunConfig& c) -> double& { return c.solver.tolerance; }));
    t.push_back(integer("solver.max_iterations",
                        [](RunConfig& c) -> int& { return c.solver.max_iterations; }));
    t.push_back({"solver.uzawa_step",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   c.solver.uzawa_step = to_double(v, line, "solver.uzawa_step");
                 },
                 [](const RunConfig& c) {
                   return c.solver.uzawa_step ? format_double(*c.solver.uzawa_step) : std::string();
                 }});
    t.push_back(real("run.T", [](RunConfig& c) -> double& { return c.T; }));
    t.push_back(real("run.output_interval", [](RunConfig& c) -> double& { return c.output_interval; }));
    t.push_back(real("run.dt_max", [](RunConfig& c) -> double& { return c.dt_max; }));
    t.push_back({"run.seed",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   const long long s = to_integer(v, line, "run.seed");
                   if (s < 0) throw ConfigError("run.seed must be >= 0", line);
                   c.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    t.push_back(boolean("run.dense", [](RunConfig& c) -> bool& { return c.dense; }));
    t.push_back(integer("run.max_steps", [](RunConfig& c) -> int& { return c.max_steps; }));
    t.push_back(integer("run.picard_iterations",
                        [](RunConfig& c) -> int& { return c.picard_iterations; }));
    t.push_back({"run.order",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   c.order = wrap("run.order", parse_split_order)(v, line);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.order)); }});
    t.push_back({"data.preset",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   c.preset = wrap("data.preset", parse_preset)(v, line);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.preset)); }});
    t.push_back(real("data.initial_u",
                     [](RunConfig& c) -> double& { return c.preset_params.initial_u; }));
    t.push_back(real("data.inflow_u", [](RunConfig& c) -> double& { return c.preset_params.inflow_u; }));
    t.push_back(real("data.speed", [](RunConfig& c) -> double& { return c.preset_params.speed; }));
    t.push_back({"data.boundary_csv",
                 [](RunConfig& c, std::string_view v, int, const fs::path& base) {
                   fs::path p{std::string(trim(v))};
                   if (p.is_relative() && !base.empty()) p = base / p;
                   c.boundary_csv = p.string();
                 },
                 [](const RunConfig& c) { return c.boundary_csv; }});
    t.push_back({"data.boundary_times",
                 [](RunConfig& c, std::string_view v, int line, const fs::path&) {
                   c.boundary_times.clear();
                   for (std::string_view x : split(v, ','))
                     c.boundary_times.push_back(to_double(x, line, "data.boundary_times"));
                 },
                 [](const RunConfig& c) { return join(c.boundary_times, ','); }});
    t.push_back(boolean("study.refine_grid", [](RunConfig& c) -> bool& { return c.refine_grid; }));
    t.push_back(integer("study.samples", [](RunConfig& c) -> int& { return c.samples; }));
    return t;
  }();
  return k;
}

const Key* find_key(std::string_view name) {
  for (const auto& k : keys())
    if (name == k.name) return &k;
  return nullptr;
}

// Line of the longest key named in a validation message, 0 if none.
int line_for_message(const std::string& what, const std::map<std::string, int, std::less<>>& seen) {
  std::size_t best = 0;
  int line = 0;
  for (const auto& [key, l] : seen)
    if (what.find(key) != std::string::npos && key.size() > best) {
      best = key.size();
      line = l;
    }
  return line;
}

}  // namespace

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  for (std::string_view x : split(text, ',')) {
    if (x.empty()) continue;
    out.push_back(to_double(x, 0, "list"));
  }
  if (out.empty()) throw ConfigError("empty list", 0);
  return out;
}

RunConfig parse_config_text(std::string_view text, const fs::path& base_dir) {
  RunConfig cfg;
  std::map<std::string, int, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no);
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const Key* k = find_key(key);
    if (!k) throw ConfigError("unknown key '" + std::string(key) + "'", line_no);
    if (const auto it = seen.find(key); it != seen.end())
      throw ConfigError("duplicate key '" + std::string(key) + "' (lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no) + ")",
                        line_no);
    seen.emplace(std::string(key), line_no);
    k->set(cfg, value, line_no, base_dir);
  }
  if (!seen.count("run.T")) throw ConfigError("missing required key 'run.T'", 0);
  try {
    cfg.validate();
    (void)cfg.problem();
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), line_for_message(e.what(), seen));
  }
  return cfg;
}

RunConfig parse_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.parent_path());
}

std::string echo_config(const RunConfig& config) {
  std::string s;
  for (const auto& k : keys()) {
    const std::string v = k.get(config);
    if (v.empty()) continue;
    s += k.name;
    s += " = ";
    s += v;
    s += '\n';
  }
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

namespace {

const char* kReportHeader =
    "t,min_u,max_u,sqrt_tau_v_L2,v_L2V1_running,eps_gradu_running,vneg1_proxy";

std::string csv_row(std::initializer_list<std::string> cols) {
  std::string s;
  for (const auto& c : cols) {
    if (!s.empty()) s += ',';
    s += c;
  }
  s += '\n';
  return s;
}

std::string fd(double x) { return format_double(x); }

std::string slot(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", k);
  return buf;
}

}  // namespace

void write_report_csv(const fs::path& path, const EnergyReport& report) {
  std::string s = std::string(kReportHeader) + '\n';
  for (const auto& r : report.rows)
    s += csv_row({fd(r.t), fd(r.min_u), fd(r.max_u), fd(r.sqrt_tau_v_L2), fd(r.v_L2V1_running),
                  fd(r.eps_gradu_running), fd(r.vneg1_proxy)});
  write_text(path, s);
}

EnergyReport read_report_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (trim(line) != kReportHeader) throw std::runtime_error("unexpected report header");
  EnergyReport rep;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != 7) throw ConfigError("report row needs 7 columns", n);
    EnergyRow r;
    r.t = to_double(c[0], n, "t");
    r.min_u = to_double(c[1], n, "min_u");
    r.max_u = to_double(c[2], n, "max_u");
    r.sqrt_tau_v_L2 = to_double(c[3], n, "sqrt_tau_v_L2");
    r.v_L2V1_running = to_double(c[4], n, "v_L2V1_running");
    r.eps_gradu_running = to_double(c[5], n, "eps_gradu_running");
    r.vneg1_proxy = to_double(c[6], n, "vneg1_proxy");
    rep.rows.push_back(r);
  }
  return rep;
}

void dump_field(const fs::path& path, std::span<const double> values) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::string bytes(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t b = std::bit_cast<std::uint64_t>(values[i]);
    for (int k = 0; k < 8; ++k) bytes[8 * i + k] = static_cast<char>((b >> (8 * k)) & 0xff);
  }
  write_text(path, bytes);
}

std::vector<double> load_field(const fs::path& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != 8 * expected_count)
    throw std::runtime_error("'" + path.string() + "' holds " + std::to_string(bytes.size()) +
                             " bytes, expected " + std::to_string(8 * expected_count));
  std::vector<double> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    std::uint64_t b = 0;
    for (int k = 0; k < 8; ++k)
      b |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + k])) << (8 * k);
    out[i] = std::bit_cast<double>(b);
  }
  return out;
}

namespace {

std::string timestamp_line() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return std::string("# timestamp (varies between reruns): ") + buf + '\n';
}

}  // namespace

void emit_run(const fs::path& outdir, const RunConfig& config, const Trajectory& traj) {
  fs::create_directories(outdir);
  write_text(outdir / "config.txt", echo_config(config));
  write_report_csv(outdir / "report.csv", traj.report);

  const StaggeredGrid& g = traj.grid;
  const fs::path fields = outdir / "fields";
  std::string side;
  side += timestamp_line();
  side += "nx = " + std::to_string(g.nx()) + "\n";
  side += "ny = " + std::to_string(g.ny()) + "\n";
  side += "Lx = " + fd(g.Lx()) + "\n";
  side += "Ly = " + fd(g.Ly()) + "\n";
  side += "dx = " + fd(g.dx()) + "\n";
  side += "dy = " + fd(g.dy()) + "\n";
  side += "byte_order = little\n";
  side += "value_type = float64\n";
  side += "layout = row-major, y outer, x inner\n";
  side += "field u = nx*ny (cells)\n";
  side += "field p = nx*ny (cells)\n";
  side += "field vx = (nx+1)*ny (x-faces)\n";
  side += "field vy = nx*(ny+1) (y-faces)\n";
  side += "field bt = boundary faces (bottom, right, top, left)\n";
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const Snapshot& s = traj.snapshots[k];
    const std::string id = slot(static_cast<int>(k));
    dump_field(fields / ("u_" + id + ".bin"), s.u);
    dump_field(fields / ("vx_" + id + ".bin"), s.v.vx);
    dump_field(fields / ("vy_" + id + ".bin"), s.v.vy);
    dump_field(fields / ("p_" + id + ".bin"), s.v.p);
    dump_field(fields / ("bt_" + id + ".bin"), s.v.bt);
    side += "snapshot " + id + " t = " + fd(s.t) + "\n";
  }
  if (traj.dense) {
    side += "steps = " + std::to_string(traj.steps.size()) + "\n";
    for (std::size_t n = 0; n < traj.steps.size(); ++n) {
      const DenseStep& d = traj.steps[n];
      const std::string id = slot(static_cast<int>(n));
      dump_field(fields / "steps" / ("u_" + id + ".bin"), d.u);
      dump_field(fields / "steps" / ("vx_" + id + ".bin"), d.vx);
      dump_field(fields / "steps" / ("vy_" + id + ".bin"), d.vy);
      side += "step " + id + " t_old = " + fd(d.t_old) + " t_new = " + fd(d.t_new) +
              " t_boundary = " + fd(d.t_boundary) + "\n";
    }
  }
  write_text(fields / "fields.txt", side);
}

LoadedRun load_run(const fs::path& outdir) {
  RunConfig cfg = parse_config(outdir / "config.txt");
  const ProblemData data = cfg.problem();
  Trajectory traj(cfg.grid(), cfg.model());
  traj.transport = cfg.transport;
  traj.tau = cfg.fluid.tau;
  traj.T = cfg.T;
  traj.boundary = data.boundary;
  traj.u0 = data.u0;
  const StaggeredGrid& g = traj.grid;
  const fs::path fields = outdir / "fields";
  std::ifstream in(fields / "fields.txt");
  if (!in) throw std::runtime_error("missing " + (fields / "fields.txt").string());
  std::string line;
  int nx = -1, ny = -1;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string a, b, c;
    ls >> a;
    if (a == "nx") {
      ls >> b >> nx;
    } else if (a == "ny") {
      ls >> b >> ny;
    } else if (a == "snapshot") {
      std::string id, t_eq, t_val;
      ls >> id >> t_eq >> c >> t_val;
      Snapshot s;
      s.t = to_double(t_val, 0, "snapshot time");
      s.u = load_field(fields / ("u_" + id + ".bin"), g.cell_count());
      s.v.vx = load_field(fields / ("vx_" + id + ".bin"), g.xface_count());
      s.v.vy = load_field(fields / ("vy_" + id + ".bin"), g.yface_count());
      s.v.p = load_field(fields / ("p_" + id + ".bin"), g.cell_count());
      s.v.bt = load_field(fields / ("bt_" + id + ".bin"), g.boundary_count());
      traj.snapshots.push_back(std::move(s));
    } else if (a == "step") {
      std::string id, k1, e1, v1, k2, e2, v2, k3, e3, v3;
      ls >> id >> k1 >> e1 >> v1 >> k2 >> e2 >> v2 >> k3 >> e3 >> v3;
      DenseStep d;
      d.t_old = to_double(v1, 0, "t_old");
      d.t_new = to_double(v2, 0, "t_new");
      d.t_boundary = to_double(v3, 0, "t_boundary");
      d.u = load_field(fields / "steps" / ("u_" + id + ".bin"), g.cell_count());
      d.vx = load_field(fields / "steps" / ("vx_" + id + ".bin"), g.xface_count());
      d.vy = load_field(fields / "steps" / ("vy_" + id + ".bin"), g.yface_count());
      traj.steps.push_back(std::move(d));
      traj.dense = true;
    }
  }
  if (nx != g.nx() || ny != g.ny())
    throw std::runtime_error("fields.txt grid does not match config.txt");
  traj.report = read_report_csv(outdir / "report.csv");
  return {std::move(cfg), std::move(traj)};
}

void write_epsilon_study(const fs::path& outdir, const EpsilonStudy& study) {
  std::string s =
      "epsilon,nx,ny,resolved,cauchy_L1,eps_gradu,sqrt_tau_v_L2,v_L2V1,vneg1_proxy,min_u,max_u,"
      "min_m_density,min_m_estimate_margin,certified,steps\n";
  for (const auto& r : study.rows)
    s += csv_row({fd(r.epsilon), std::to_string(r.nx), std::to_string(r.ny),
                  r.resolved ? "1" : "0", fd(r.cauchy_L1), fd(r.eps_gradu), fd(r.sqrt_tau_v_L2),
                  fd(r.v_L2V1), fd(r.vneg1_proxy), fd(r.min_u), fd(r.max_u), fd(r.min_m_density),
                  fd(r.min_m_estimate_margin), r.certified ? "1" : "0", std::to_string(r.steps)});
  write_text(outdir / "study.csv", s);
  for (std::size_t k = 0; k < study.rows.size(); ++k)
    write_report_csv(outdir / ("eps_" + slot(static_cast<int>(k))) / "report.csv",
                     study.rows[k].report);

  std::vector<double> x, y;
  for (const auto& r : study.rows)
    if (std::isfinite(r.cauchy_L1) && r.cauchy_L1 > 0.0) {
      x.push_back(std::log(r.epsilon));
      y.push_back(std::log(r.cauchy_L1));
    }
  std::string f;
  if (x.size() >= 2) {
    const auto [slope, icpt] = fit_line(x, y);
    f += "slope = " + fd(slope) + "\n";
    f += "intercept = " + fd(icpt) + "\n";
  } else {
    f += "slope = nan\n";
  }
  f += "fit = log(cauchy_L1) against log(epsilon), " + std::to_string(x.size()) + " points\n";
  f += std::string("cauchy_strictly_decreasing = ") +
       (study.cauchy_strictly_decreasing ? "true" : "false") + "\n";
  f += "last_over_first = " + fd(study.last_over_first) + "\n";
  for (const auto& w : study.warnings) f += "warning: " + w + "\n";
  write_text(outdir / "fit.txt", f);
}

void write_tau_study(const fs::path& outdir, const TauStudy& study) {
  std::string s =
      "tau,D,B_V1_max,dtB_max,sqrt_tau_v_L2,v_L2V1,vneg1_proxy,eps_gradu,min_u,max_u,steps,"
      "velocity_substeps\n";
  for (const auto& r : study.rows)
    s += csv_row({fd(r.tau), fd(r.D), fd(r.B_V1_max), fd(r.dtB_max), fd(r.sqrt_tau_v_L2),
                  fd(r.v_L2V1), fd(r.vneg1_proxy), fd(r.eps_gradu), fd(r.min_u), fd(r.max_u),
                  std::to_string(r.steps), std::to_string(r.velocity_substeps)});
  write_text(outdir / "study.csv", s);
  for (std::size_t k = 0; k < study.rows.size(); ++k)
    write_report_csv(outdir / ("tau_" + slot(static_cast<int>(k))) / "report.csv",
                     study.rows[k].report);
  std::string f = "slope = " + (study.slope ? fd(*study.slope) : std::string("nan")) + "\n";
  f += "intercept = " + fd(study.intercept) + "\n";
  f += "fit = log(D) against log(tau), " + std::to_string(study.fit_points) + " points\n";
  for (const auto& w : study.warnings) f += "warning: " + w + "\n";
  write_text(outdir / "fit.txt", f);
}

void write_solver_trace_csv(const fs::path& path, const std::vector<SolverTraceEntry>& trace) {
  std::string s = "solve,iteration,momentum_residual,div_residual\n";
  for (const auto& r : trace)
    s += csv_row({std::to_string(r.solve), std::to_string(r.iteration), fd(r.momentum_residual),
                  fd(r.div_residual)});
  write_text(path, s);
}

void write_certificate_csv(const fs::path& path, const Certificate& cert) {
  std::string s = "name,v,value,bound,pass\n";
  for (const auto& r : cert.rows)
    s += csv_row({r.name, fd(r.v), fd(r.value), fd(r.bound), r.pass ? "1" : "0"});
  write_text(path, s);
}

void dump_measures(const fs::path& dir, const StaggeredGrid& grid,
                   const std::vector<DefectMeasure>& measures) {
  std::vector<double> plus, minus;
  std::string side = timestamp_line();
  side += "levels = " + std::to_string(measures.size()) + "\n";
  side += "nx = " + std::to_string(grid.nx()) + "\nny = " + std::to_string(grid.ny()) + "\n";
  side += "byte_order = little\nvalue_type = float64\n";
  side += "layout = level-major, then row-major cells (y outer, x inner)\n";
  side += "content = time-integrated m+ and m- per cell\n";
  for (const auto& m : measures) {
    if (m.plus_cells.size() != static_cast<std::size_t>(grid.cell_count()))
      throw std::runtime_error("measures were accumulated without per-cell storage");
    plus.insert(plus.end(), m.plus_cells.begin(), m.plus_cells.end());
    minus.insert(minus.end(), m.minus_cells.begin(), m.minus_cells.end());
    side += "v = " + fd(m.v) + "\n";
  }
  dump_field(dir / "m_plus.bin", plus);
  dump_field(dir / "m_minus.bin", minus);
  write_text(dir / "measures.txt", side);
}

}  // namespace blsim
