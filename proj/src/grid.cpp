#include "blsim/grid.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "blsim/errors.hpp"

namespace blsim {

StaggeredGrid::StaggeredGrid(int nx, int ny, double Lx, double Ly)
    : nx_(nx), ny_(ny), Lx_(Lx), Ly_(Ly) {
  if (nx < 4) throw DomainError("grid.nx must be >= 4");
  if (ny < 4 && ny != 1) throw DomainError("grid.ny must be >= 4 (or 1 for slice mode)");
  if (!(Lx > 0.0) || !(Ly > 0.0)) throw DomainError("grid side lengths must be > 0");
  dx_ = Lx / nx;
  dy_ = Ly / ny;
  boundary_.reserve(2 * (nx + ny));
  for (int i = 0; i < nx; ++i) {
    boundary_.push_back({Side::bottom, i, dx_, 0.0, -1.0, xc(i), 0.0, cell(i, 0), yface(i, 0)});
  }
  for (int j = 0; j < ny; ++j) {
    boundary_.push_back(
        {Side::right, j, dy_, 1.0, 0.0, Lx_, yc(j), cell(nx - 1, j), xface(nx, j)});
  }
  for (int i = 0; i < nx; ++i) {
    boundary_.push_back(
        {Side::top, i, dx_, 0.0, 1.0, xc(i), Ly_, cell(i, ny - 1), yface(i, ny)});
  }
  for (int j = 0; j < ny; ++j) {
    boundary_.push_back({Side::left, j, dy_, -1.0, 0.0, 0.0, yc(j), cell(0, j), xface(0, j)});
  }
}

int StaggeredGrid::boundary_index(Side side, int along) const {
  switch (side) {
    case Side::bottom: return along;
    case Side::right: return nx_ + along;
    case Side::top: return nx_ + ny_ + along;
    case Side::left: return 2 * nx_ + ny_ + along;
  }
  return -1;
}

VelocityField VelocityField::zeros(const StaggeredGrid& grid) {
  VelocityField v;
  v.vx.assign(grid.xface_count(), 0.0);
  v.vy.assign(grid.yface_count(), 0.0);
  v.p.assign(grid.cell_count(), 0.0);
  v.bt.assign(grid.boundary_count(), 0.0);
  return v;
}

VelocityField VelocityField::uniform(const StaggeredGrid& grid, double ux, double uy) {
  VelocityField v = zeros(grid);
  std::fill(v.vx.begin(), v.vx.end(), ux);
  std::fill(v.vy.begin(), v.vy.end(), uy);
  for (int k = 0; k < grid.boundary_count(); ++k) {
    const Side s = grid.boundary()[k].side;
    v.bt[k] = (s == Side::bottom || s == Side::top) ? ux : uy;
  }
  return v;
}

VelocityField difference(const VelocityField& a, const VelocityField& b) {
  VelocityField d = a;
  for (std::size_t k = 0; k < d.vx.size(); ++k) d.vx[k] -= b.vx[k];
  for (std::size_t k = 0; k < d.vy.size(); ++k) d.vy[k] -= b.vy[k];
  for (std::size_t k = 0; k < d.p.size(); ++k) d.p[k] -= b.p[k];
  for (std::size_t k = 0; k < d.bt.size(); ++k) d.bt[k] -= b.bt[k];
  return d;
}

BoundarySnapshot BoundaryData::at(double t) const {
  if (levels.empty()) throw DomainError("boundary data has no time levels");
  if (levels.size() == 1 || t <= times.front()) return levels.front();
  if (t >= times.back()) return levels.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  BoundarySnapshot s = levels[lo];
  const BoundarySnapshot& b = levels[hi];
  for (std::size_t k = 0; k < s.u_b.size(); ++k) {
    s.u_b[k] = (1.0 - w) * s.u_b[k] + w * b.u_b[k];
    s.b_n[k] = (1.0 - w) * s.b_n[k] + w * b.b_n[k];
    s.b_t[k] = (1.0 - w) * s.b_t[k] + w * b.b_t[k];
  }
  return s;
}

bool BoundaryData::time_independent() const {
  for (std::size_t l = 1; l < levels.size(); ++l) {
    if (levels[l].u_b != levels[0].u_b || levels[l].b_n != levels[0].b_n ||
        levels[l].b_t != levels[0].b_t) {
      return false;
    }
  }
  return true;
}

BoundaryData BoundaryData::constant(BoundarySnapshot snapshot) {
  BoundaryData d;
  d.times = {0.0};
  d.levels = {std::move(snapshot)};
  return d;
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    if (!c.pass) out << c.name << ": value " << c.value << " exceeds " << c.bound << "\n";
  }
  return out.str();
}

ValidationReport validate_data(const StaggeredGrid& grid, const BoundaryData& boundary,
                               const InitialData& init, double tau,
                               double divergence_tolerance) {
  const auto nb = static_cast<std::size_t>(grid.boundary_count());
  if (init.u0.size() != static_cast<std::size_t>(grid.cell_count())) {
    throw DomainError("initial saturation has wrong size");
  }
  if (boundary.levels.empty() || boundary.times.size() != boundary.levels.size()) {
    throw DomainError("boundary data needs one time per level");
  }
  for (std::size_t l = 0; l < boundary.levels.size(); ++l) {
    const auto& s = boundary.levels[l];
    if (s.u_b.size() != nb || s.b_n.size() != nb || s.b_t.size() != nb) {
      throw DomainError("boundary level " + std::to_string(l) + " has wrong size");
    }
    if (l > 0 && !(boundary.times[l] > boundary.times[l - 1])) {
      throw DomainError("boundary time levels must be strictly increasing");
    }
  }
  if (init.v0) {
    if (init.v0->vx.size() != static_cast<std::size_t>(grid.xface_count()) ||
        init.v0->vy.size() != static_cast<std::size_t>(grid.yface_count())) {
      throw DomainError("initial velocity has wrong size");
    }
  }

  ValidationReport report;
  {
    double worst = 0.0;
    for (double u : init.u0) worst = std::max({worst, -u, u - 1.0});
    report.checks.push_back({"u0_in_unit_interval", worst <= 0.0, worst, 0.0});
  }
  {
    double worst = 0.0;
    for (const auto& s : boundary.levels) {
      for (double u : s.u_b) worst = std::max({worst, -u, u - 1.0});
    }
    report.checks.push_back({"ub_in_unit_interval", worst <= 0.0, worst, 0.0});
  }
  const double flux_tol = 1e-10 * grid.perimeter();
  for (std::size_t l = 0; l < boundary.levels.size(); ++l) {
    double net = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      net += boundary.levels[l].b_n[k] * grid.boundary()[k].length;
    }
    report.checks.push_back({"net_flux_level_" + std::to_string(l),
                             std::abs(net) <= flux_tol, std::abs(net), flux_tol});
  }
  if (tau > 0.0) {
    if (!init.v0) {
      report.checks.push_back({"v0_present", false, 0.0, 0.0});
    } else {
      const double div = max_abs(discrete_divergence(*init.v0, grid));
      report.checks.push_back(
          {"v0_divergence_free", div <= divergence_tolerance, div, divergence_tolerance});
      const BoundarySnapshot b0 = boundary.at(boundary.times.front());
      double mismatch = 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        const BoundaryFace& f = grid.boundary()[k];
        const bool xside = f.side == Side::left || f.side == Side::right;
        const double comp = xside ? init.v0->vx[f.face] : init.v0->vy[f.face];
        const double normal = xside ? comp * f.normal_x : comp * f.normal_y;
        mismatch = std::max(mismatch, std::abs(normal - b0.b_n[k]));
      }
      report.checks.push_back({"v0_normal_trace_matches_b", mismatch <= 1e-12, mismatch, 1e-12});
    }
  }
  return report;
}

std::vector<double> discrete_divergence(const VelocityField& v, const StaggeredGrid& grid) {
  if (v.vx.size() != static_cast<std::size_t>(grid.xface_count()) ||
      v.vy.size() != static_cast<std::size_t>(grid.yface_count())) {
    throw DomainError("velocity field does not match grid");
  }
  std::vector<double> div(grid.cell_count());
  const double rdx = 1.0 / grid.dx();
  const double rdy = 1.0 / grid.dy();
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      div[grid.cell(i, j)] = (v.vx[grid.xface(i + 1, j)] - v.vx[grid.xface(i, j)]) * rdx +
                             (v.vy[grid.yface(i, j + 1)] - v.vy[grid.yface(i, j)]) * rdy;
    }
  }
  return div;
}

NormKind parse_norm_kind(std::string_view text) {
  if (text == "L1") return NormKind::L1;
  if (text == "L2") return NormKind::L2;
  if (text == "H1_semi") return NormKind::H1_semi;
  if (text == "Linf") return NormKind::Linf;
  throw DomainError("unknown norm kind '" + std::string(text) + "'");
}

double norm(std::span<const double> field, const StaggeredGrid& grid, NormKind kind) {
  if (field.size() != static_cast<std::size_t>(grid.cell_count())) {
    throw DomainError("field does not match grid");
  }
  const double area = grid.cell_area();
  switch (kind) {
    case NormKind::L1: {
      double s = 0.0;
      for (double f : field) s += std::abs(f);
      return s * area;
    }
    case NormKind::L2: {
      double s = 0.0;
      for (double f : field) s += f * f;
      return std::sqrt(s * area);
    }
    case NormKind::Linf: return max_abs(field);
    case NormKind::H1_semi: {
      double s = 0.0;
      const double wx = grid.dy() / grid.dx();
      const double wy = grid.dx() / grid.dy();
      for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i + 1 < grid.nx(); ++i) {
          const double d = field[grid.cell(i + 1, j)] - field[grid.cell(i, j)];
          s += wx * d * d;
        }
      }
      for (int j = 0; j + 1 < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
          const double d = field[grid.cell(i, j + 1)] - field[grid.cell(i, j)];
          s += wy * d * d;
        }
      }
      return std::sqrt(s);
    }
  }
  return 0.0;
}

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double wall_vertex_value(const StaggeredGrid& grid, std::span<const double> bt, Side side,
                         int along) {
  const int a = grid.boundary_index(side, along - 1);
  const int b = grid.boundary_index(side, along);
  return 0.5 * (bt[a] + bt[b]);
}

double velocity_l2(const VelocityField& v, const StaggeredGrid& grid) {
  const int nx = grid.nx();
  const int ny = grid.ny();
  double s = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const double w = (i == 0 || i == nx) ? 0.5 : 1.0;
      const double f = v.vx[grid.xface(i, j)];
      s += w * f * f;
    }
  }
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double w = (j == 0 || j == ny) ? 0.5 : 1.0;
      const double f = v.vy[grid.yface(i, j)];
      s += w * f * f;
    }
  }
  return std::sqrt(s * grid.cell_area());
}

double velocity_h1_semi(const VelocityField& v, const StaggeredGrid& grid) {
  const int nx = grid.nx();
  const int ny = grid.ny();
  const double wx = grid.dy() / grid.dx();
  const double wy = grid.dx() / grid.dy();
  double s = 0.0;
  // vx: differences across cells in x, between rows in y, half edges to the walls.
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double d = v.vx[grid.xface(i + 1, j)] - v.vx[grid.xface(i, j)];
      s += wx * d * d;
    }
  }
  for (int i = 1; i < nx; ++i) {
    for (int j = 0; j + 1 < ny; ++j) {
      const double d = v.vx[grid.xface(i, j + 1)] - v.vx[grid.xface(i, j)];
      s += wy * d * d;
    }
    const double db = v.vx[grid.xface(i, 0)] - wall_vertex_value(grid, v.bt, Side::bottom, i);
    const double dt = v.vx[grid.xface(i, ny - 1)] - wall_vertex_value(grid, v.bt, Side::top, i);
    s += 2.0 * wy * (db * db + dt * dt);
  }
  // vy: the same with the roles of x and y exchanged.
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double d = v.vy[grid.yface(i, j + 1)] - v.vy[grid.yface(i, j)];
      s += wy * d * d;
    }
  }
  for (int j = 1; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const double d = v.vy[grid.yface(i + 1, j)] - v.vy[grid.yface(i, j)];
      s += wx * d * d;
    }
    const double dl = v.vy[grid.yface(0, j)] - wall_vertex_value(grid, v.bt, Side::left, j);
    const double dr =
        v.vy[grid.yface(nx - 1, j)] - wall_vertex_value(grid, v.bt, Side::right, j);
    s += 2.0 * wx * (dl * dl + dr * dr);
  }
  return std::sqrt(s);
}

double velocity_h1(const VelocityField& v, const StaggeredGrid& grid) {
  const double a = velocity_l2(v, grid);
  const double b = velocity_h1_semi(v, grid);
  return std::sqrt(a * a + b * b);
}

PresetKind parse_preset(std::string_view text) {
  if (text == "flood") return PresetKind::flood;
  if (text == "lid_driven") return PresetKind::lid_driven;
  if (text == "quiescent") return PresetKind::quiescent;
  if (text == "uniform") return PresetKind::uniform;
  if (text == "random") return PresetKind::random;
  throw DomainError("unknown preset '" + std::string(text) + "'");
}

std::string_view to_string(PresetKind kind) {
  switch (kind) {
    case PresetKind::flood: return "flood";
    case PresetKind::lid_driven: return "lid_driven";
    case PresetKind::quiescent: return "quiescent";
    case PresetKind::uniform: return "uniform";
    case PresetKind::random: return "random";
  }
  return "?";
}

namespace {

// Arc-length coordinate of a boundary face midpoint, counter-clockwise from (0, 0).
double arc_length(const StaggeredGrid& grid, const BoundaryFace& f) {
  switch (f.side) {
    case Side::bottom: return f.x;
    case Side::right: return grid.Lx() + f.y;
    case Side::top: return grid.Lx() + grid.Ly() + (grid.Lx() - f.x);
    case Side::left: return 2.0 * grid.Lx() + grid.Ly() + (grid.Ly() - f.y);
  }
  return 0.0;
}

void fill_random(const StaggeredGrid& grid, const PresetParams& params, BoundarySnapshot& s,
                 std::vector<double>& u0) {
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::acos(-1.0);
  const double P = grid.perimeter();
  std::array<double, 3> an{}, pn{}, at{}, pt{}, au{}, pu{};
  for (int m = 0; m < 3; ++m) {
    an[m] = params.speed * (2.0 * unit(rng) - 1.0) / (m + 1);
    pn[m] = two_pi * unit(rng);
    at[m] = params.speed * (2.0 * unit(rng) - 1.0) / (m + 1);
    pt[m] = two_pi * unit(rng);
    au[m] = (2.0 * unit(rng) - 1.0) / 3.0;
    pu[m] = two_pi * unit(rng);
  }
  double net = 0.0;
  for (std::size_t k = 0; k < s.b_n.size(); ++k) {
    const BoundaryFace& f = grid.boundary()[k];
    const double a = arc_length(grid, f) / P;
    double bn = 0.0, bt = 0.0, ub = 0.5;
    for (int m = 0; m < 3; ++m) {
      bn += an[m] * std::cos(two_pi * (m + 1) * a + pn[m]);
      bt += at[m] * std::cos(two_pi * (m + 1) * a + pt[m]);
      ub += 0.5 * au[m] * std::sin(two_pi * (m + 1) * a + pu[m]);
    }
    s.b_n[k] = bn;
    s.b_t[k] = bt;
    s.u_b[k] = std::clamp(ub, 0.0, 1.0);
    net += bn * f.length;
  }
  for (double& bn : s.b_n) bn -= net / P;
  for (double& u : u0) u = unit(rng);
}

}  // namespace

ProblemData make_preset(PresetKind kind, const StaggeredGrid& grid, const PresetParams& params) {
  const auto nb = static_cast<std::size_t>(grid.boundary_count());
  BoundarySnapshot s{std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0),
                     std::vector<double>(nb, 0.0)};
  ProblemData data;
  data.u0.assign(grid.cell_count(), params.initial_u);
  for (std::size_t k = 0; k < nb; ++k) {
    const BoundaryFace& f = grid.boundary()[k];
    switch (kind) {
      case PresetKind::quiescent:
        s.u_b[k] = params.initial_u;
        break;
      case PresetKind::flood:
      case PresetKind::uniform:
        s.u_b[k] = f.side == Side::left ? params.inflow_u : params.initial_u;
        if (f.side == Side::left) s.b_n[k] = -params.speed;
        if (f.side == Side::right) s.b_n[k] = params.speed;
        if (kind == PresetKind::uniform && (f.side == Side::bottom || f.side == Side::top)) {
          s.b_t[k] = params.speed;
        }
        break;
      case PresetKind::lid_driven:
        s.u_b[k] = params.initial_u;
        if (f.side == Side::top) s.b_t[k] = params.speed;
        break;
      case PresetKind::random:
        break;
    }
  }
  if (kind == PresetKind::random) fill_random(grid, params, s, data.u0);
  if (kind == PresetKind::lid_driven) {
    for (int j = 0; j < grid.ny(); ++j) {
      for (int i = 0; i < grid.nx(); ++i) {
        data.u0[grid.cell(i, j)] = grid.xc(i) < 0.5 * grid.Lx() ? 1.0 : 0.0;
      }
    }
  }
  data.boundary = BoundaryData::constant(std::move(s));
  return data;
}

BoundaryData load_boundary_csv(const std::string& path, const StaggeredGrid& grid,
                               std::vector<double> times) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open boundary csv '" + path + "'");
  if (times.empty()) throw DomainError("boundary csv needs at least one time level");
  const auto nb = static_cast<std::size_t>(grid.boundary_count());
  BoundaryData data;
  data.times = std::move(times);
  data.levels.assign(data.times.size(),
                     BoundarySnapshot{std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0),
                                      std::vector<double>(nb, 0.0)});
  std::vector<std::vector<bool>> seen(data.times.size(), std::vector<bool>(nb, false));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find_first_of("0123456789") != 0) continue;  // header
    std::array<double, 5> cols{};
    std::size_t pos = 0;
    for (int c = 0; c < 5; ++c) {
      const std::size_t end = c < 4 ? line.find(',', pos) : line.size();
      if (end == std::string::npos) {
        throw DomainError(path + ":" + std::to_string(lineno) + ": expected 5 columns");
      }
      const char* first = line.data() + pos;
      const char* last = line.data() + end;
      while (first < last && *first == ' ') ++first;
      auto [ptr, ec] = std::from_chars(first, last, cols[c]);
      if (ec != std::errc()) {
        throw DomainError(path + ":" + std::to_string(lineno) + ": malformed number");
      }
      pos = end + 1;
    }
    const auto face = static_cast<std::size_t>(cols[0]);
    const auto level = static_cast<std::size_t>(cols[1]);
    if (face >= nb || level >= data.times.size()) {
      throw DomainError(path + ":" + std::to_string(lineno) + ": face or level out of range");
    }
    data.levels[level].u_b[face] = cols[2];
    data.levels[level].b_n[face] = cols[3];
    data.levels[level].b_t[face] = cols[4];
    seen[level][face] = true;
  }
  for (const auto& lvl : seen) {
    if (std::find(lvl.begin(), lvl.end(), false) != lvl.end()) {
      throw DomainError(path + ": every face needs a row at every level");
    }
  }
  return data;
}

}  // namespace blsim
