#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "blsim/errors.hpp"
#include "blsim/grid.hpp"

using namespace blsim;

namespace {

double net_flux(const StaggeredGrid& g, const BoundarySnapshot& b) {
  double s = 0.0;
  for (int k = 0; k < g.boundary_count(); ++k) s += b.b_n[k] * g.boundary()[k].length;
  return s;
}

}  // namespace

TEST_CASE("grid geometry and indexing") {
  const StaggeredGrid g(8, 4, 2.0, 1.0);
  CHECK(g.dx() == 0.25);
  CHECK(g.dy() == 0.25);
  CHECK(g.cell_count() == 32);
  CHECK(g.xface_count() == 36);
  CHECK(g.yface_count() == 40);
  CHECK(g.boundary_count() == 2 * (8 + 4));
  CHECK(g.cell(3, 2) == 19);
  CHECK(g.xface(3, 2) == 21);
  CHECK(g.perimeter() == 6.0);
  CHECK_THROWS_AS(StaggeredGrid(2, 8), DomainError);
  CHECK_THROWS_AS(StaggeredGrid(8, 2), DomainError);
  CHECK_NOTHROW(StaggeredGrid(8, 1));
  CHECK(StaggeredGrid(8, 1).slice_mode());
}

TEST_CASE("boundary faces are ordered bottom, right, top, left with outward normals") {
  const StaggeredGrid g(4, 5);
  const auto& b = g.boundary();
  CHECK(b.front().side == Side::bottom);
  CHECK(b[4].side == Side::right);
  CHECK(b[9].side == Side::top);
  CHECK(b.back().side == Side::left);
  double total = 0.0;
  for (const auto& f : b) {
    CHECK(std::abs(f.normal_x) + std::abs(f.normal_y) == 1.0);
    total += f.length;
    if (f.side == Side::bottom) CHECK(f.normal_y == -1.0);
    if (f.side == Side::right) CHECK(f.normal_x == 1.0);
    if (f.side == Side::top) CHECK(f.normal_y == 1.0);
    if (f.side == Side::left) CHECK(f.normal_x == -1.0);
  }
  CHECK(total == doctest::Approx(g.perimeter()));
  CHECK(g.boundary_index(Side::right, 1) == 5);
}

TEST_CASE("presets carry zero net flux and admissible saturations") {
  const StaggeredGrid g(16, 16);
  for (PresetKind k : {PresetKind::flood, PresetKind::lid_driven, PresetKind::quiescent,
                       PresetKind::uniform, PresetKind::random}) {
    PresetParams p;
    p.seed = 7;
    const ProblemData d = make_preset(k, g, p);
    for (const auto& level : d.boundary.levels) CHECK(std::abs(net_flux(g, level)) < 1e-12);
    const InitialData init{d.u0, std::nullopt};
    CHECK(validate_data(g, d.boundary, init, 0.0).ok());
  }
}

TEST_CASE("flood preset: inflow left, outflow right, walls elsewhere") {
  const StaggeredGrid g(8, 8);
  const ProblemData d = make_preset(PresetKind::flood, g, PresetParams{});
  const BoundarySnapshot& b = d.boundary.levels.front();
  for (int k = 0; k < g.boundary_count(); ++k) {
    const Side s = g.boundary()[k].side;
    if (s == Side::left) {
      CHECK(b.b_n[k] == -1.0);
      CHECK(b.u_b[k] == 1.0);
    } else if (s == Side::right) {
      CHECK(b.b_n[k] == 1.0);
    } else {
      CHECK(b.b_n[k] == 0.0);
      CHECK(b.b_t[k] == 0.0);
    }
  }
  for (double u : d.u0) CHECK(u == 0.0);
}

TEST_CASE("random preset is reproducible from its seed") {
  const StaggeredGrid g(12, 12);
  PresetParams p;
  p.seed = 42;
  const ProblemData a = make_preset(PresetKind::random, g, p);
  const ProblemData b = make_preset(PresetKind::random, g, p);
  p.seed = 43;
  const ProblemData c = make_preset(PresetKind::random, g, p);
  CHECK(a.u0 == b.u0);
  CHECK(a.boundary.levels[0].b_n == b.boundary.levels[0].b_n);
  CHECK(a.u0 != c.u0);
}

TEST_CASE("validation flags bad data") {
  const StaggeredGrid g(8, 8);
  ProblemData d = make_preset(PresetKind::flood, g, PresetParams{});
  d.boundary.levels[0].b_n[g.boundary_index(Side::left, 0)] = -2.0;
  InitialData init{d.u0, std::nullopt};
  ValidationReport r = validate_data(g, d.boundary, init, 0.0);
  CHECK_FALSE(r.ok());
  CHECK(r.summary().find("net_flux_level_0") != std::string::npos);

  d = make_preset(PresetKind::flood, g, PresetParams{});
  init.u0[3] = 1.5;
  CHECK_FALSE(validate_data(g, d.boundary, init, 0.0).ok());

  init.u0.assign(g.cell_count(), 0.0);
  CHECK_FALSE(validate_data(g, d.boundary, init, 1e-2).ok());  // tau > 0 needs v0

  init.u0.resize(5);
  CHECK_THROWS_AS(validate_data(g, d.boundary, init, 0.0), DomainError);
}

TEST_CASE("uniform stream is divergence free and matches the uniform preset") {
  const StaggeredGrid g(10, 6);
  const VelocityField v = VelocityField::uniform(g, 0.7, -0.2);
  for (double d : discrete_divergence(v, g)) CHECK(std::abs(d) < 1e-13);
  VelocityField w = v;
  w.vx[g.xface(3, 2)] += 1.0;
  const auto div = discrete_divergence(w, g);
  // xface(3, 2) is the west face of cell (3, 2).
  CHECK(div[g.cell(3, 2)] == doctest::Approx(-1.0 / g.dx()));
  CHECK(div[g.cell(2, 2)] == doctest::Approx(1.0 / g.dx()));
}

TEST_CASE("norms of simple fields") {
  const StaggeredGrid g(4, 4);
  std::vector<double> one(g.cell_count(), 1.0);
  CHECK(norm(one, g, NormKind::L1) == doctest::Approx(1.0));
  CHECK(norm(one, g, NormKind::L2) == doctest::Approx(1.0));
  CHECK(norm(one, g, NormKind::H1_semi) == doctest::Approx(0.0));
  std::vector<double> ramp(g.cell_count());
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) ramp[g.cell(i, j)] = g.xc(i);
  // Discrete gradient is exactly 1 across the 12 interior x-faces.
  CHECK(norm(ramp, g, NormKind::H1_semi) == doctest::Approx(std::sqrt(0.75)));
  CHECK(norm(ramp, g, NormKind::Linf) == doctest::Approx(0.875));
  CHECK(parse_norm_kind("L2") == NormKind::L2);
  CHECK_THROWS_AS(parse_norm_kind("H2"), DomainError);
}

TEST_CASE("boundary data interpolates linearly in time") {
  const StaggeredGrid g(4, 4);
  BoundaryData d;
  const ProblemData p = make_preset(PresetKind::flood, g, PresetParams{});
  BoundarySnapshot a = p.boundary.levels[0], b = a;
  for (auto& x : b.b_n) x *= 3.0;
  d.times = {0.0, 2.0};
  d.levels = {a, b};
  const BoundarySnapshot m = d.at(1.0);
  const int k = g.boundary_index(Side::left, 1);
  CHECK(m.b_n[k] == doctest::Approx(-2.0));
  CHECK(d.at(5.0).b_n[k] == doctest::Approx(-3.0));
  CHECK_FALSE(d.time_independent());
}

TEST_CASE("boundary CSV loading") {
  const StaggeredGrid g(4, 4);
  const auto path = std::filesystem::temp_directory_path() / "blsim_test_boundary.csv";
  {
    std::ofstream out(path);
    out << "face,level,u_b,b_n,b_t\n";
    for (int k = 0; k < g.boundary_count(); ++k) {
      const Side s = g.boundary()[k].side;
      const double bn = s == Side::left ? -1.0 : (s == Side::right ? 1.0 : 0.0);
      out << k << ",0," << (s == Side::left ? 1.0 : 0.0) << ',' << bn << ",0\n";
    }
  }
  const BoundaryData d = load_boundary_csv(path.string(), g, {0.0});
  CHECK(d.levels.size() == 1);
  CHECK(d.levels[0].b_n[g.boundary_index(Side::right, 2)] == 1.0);
  CHECK_THROWS_AS(load_boundary_csv(path.string(), g, {0.0, 1.0}), DomainError);
  std::filesystem::remove(path);
}
