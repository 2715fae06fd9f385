#include "blsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "blsim/errors.hpp"

namespace blsim {

namespace {

double clamp01(double u) { return std::clamp(u, 0.0, 1.0); }

// Composite 5-point Gauss-Legendre on [a, b].
template <class F>
double gauss_legendre(F&& f, double a, double b, int panels = 32) {
  static constexpr std::array<double, 5> nodes = {
      -0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
      0.9061798459386640};
  static constexpr std::array<double, 5> weights = {
      0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
      0.4786286704993665, 0.2369268850561891};
  const double width = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      sum += weights[k] * f(mid + 0.5 * width * nodes[k]);
    }
  }
  return 0.5 * width * sum;
}

}  // namespace

void FluidParams::validate() const {
  if (!(mu1 > 0.0)) throw DomainError("fluid.mu1 must be > 0");
  if (!(mu2 > 0.0)) throw DomainError("fluid.mu2 must be > 0");
  if (!(nu > 0.0)) throw DomainError("fluid.nu must be > 0");
  if (!(tau >= 0.0)) throw DomainError("fluid.tau must be >= 0");
}

double RelPermModel::kr1(double s) const {
  s = clamp01(s);
  switch (kind) {
    case RelPermKind::corey_quadratic: return std::pow(s, exponent);
    case RelPermKind::linear: return s;
    case RelPermKind::tabulated: break;
  }
  auto it = std::upper_bound(table.begin(), table.end(), s,
                             [](double x, const auto& row) { return x < row[0]; });
  if (it == table.begin()) return table.front()[1];
  if (it == table.end()) return table.back()[1];
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (s - lo[0]) / (hi[0] - lo[0]);
  return (1.0 - w) * lo[1] + w * hi[1];
}

double RelPermModel::kr2(double s) const {
  s = clamp01(s);
  switch (kind) {
    case RelPermKind::corey_quadratic: return std::pow(1.0 - s, exponent);
    case RelPermKind::linear: return 1.0 - s;
    case RelPermKind::tabulated: break;
  }
  auto it = std::upper_bound(table.begin(), table.end(), s,
                             [](double x, const auto& row) { return x < row[0]; });
  if (it == table.begin()) return table.front()[2];
  if (it == table.end()) return table.back()[2];
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (s - lo[0]) / (hi[0] - lo[0]);
  return (1.0 - w) * lo[2] + w * hi[2];
}

void RelPermModel::validate() const {
  if (!(k_reg > 0.0)) throw DomainError("rel_perm.k_reg must be > 0");
  if (kind == RelPermKind::corey_quadratic && !(exponent >= 1.0)) {
    throw DomainError("rel_perm.exponent must be >= 1");
  }
  if (kind == RelPermKind::tabulated) {
    if (table.size() < 2) throw DomainError("rel_perm table needs at least two rows");
    if (table.front()[0] != 0.0 || table.back()[0] != 1.0) {
      throw DomainError("rel_perm table must span s in [0, 1]");
    }
    for (std::size_t i = 1; i < table.size(); ++i) {
      if (!(table[i][0] > table[i - 1][0])) {
        throw DomainError("rel_perm table saturations must be strictly increasing");
      }
      if (table[i][1] < table[i - 1][1]) throw DomainError("k_r1 must be nondecreasing");
      if (table[i][2] > table[i - 1][2]) throw DomainError("k_r2 must be nonincreasing");
    }
  }
  if (std::abs(kr1(1.0) - 1.0) > 1e-12 || std::abs(kr2(0.0) - 1.0) > 1e-12) {
    throw DomainError("rel-perms must satisfy k_r1(1) = k_r2(0) = 1");
  }
}

std::string_view to_string(RelPermKind kind) {
  switch (kind) {
    case RelPermKind::corey_quadratic: return "corey_quadratic";
    case RelPermKind::linear: return "linear";
    case RelPermKind::tabulated: return "tabulated";
  }
  return "?";
}

std::string_view to_string(FluxMode mode) {
  return mode == FluxMode::simple ? "simple" : "series";
}

RelPermKind parse_relperm_kind(std::string_view text) {
  if (text == "corey_quadratic") return RelPermKind::corey_quadratic;
  if (text == "linear") return RelPermKind::linear;
  if (text == "tabulated") return RelPermKind::tabulated;
  throw DomainError("unknown rel_perm.kind '" + std::string(text) + "'");
}

FluxMode parse_flux_mode(std::string_view text) {
  if (text == "simple") return FluxMode::simple;
  if (text == "series") return FluxMode::series;
  throw DomainError("unknown flux.mode '" + std::string(text) + "'");
}

double series_sum(double lambda, double nu) {
  if (!(lambda > 0.0) || !(nu > 0.0)) {
    throw DomainError("series_sum needs lambda > 0 and nu > 0");
  }
  constexpr double pi = std::numbers::pi;
  const double x = pi * std::sqrt(lambda / nu);
  // coth x = 1/x + x/3 - ... for tiny x; 1/tanh loses nothing above 1e-4.
  const double coth = x < 1e-4 ? 1.0 / x + x / 3.0 : 1.0 / std::tanh(x);
  return pi / std::sqrt(lambda * nu) * coth;
}

FluxModel::FluxModel(FluidParams fluid, RelPermModel relperm, FluxMode mode)
    : fluid_(fluid), relperm_(std::move(relperm)), mode_(mode) {
  fluid_.validate();
  relperm_.validate();

  auto tables = std::make_shared<Tables>();
  constexpr int n = kSampleIntervals;
  tables->g.resize(n + 1);
  tables->g_inc.assign(n + 1, 0.0);
  tables->g_dec.assign(n + 1, 0.0);
  double h_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n; ++k) {
    const double u = static_cast<double>(k) / n;
    tables->g[k] = g_raw(u);
    h_min = std::min(h_min, h_raw(u));
  }
  double lip = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double dg = tables->g[k] - tables->g[k - 1];
    lip = std::max(lip, std::abs(dg) * n);
    tables->g_inc[k] = tables->g_inc[k - 1] + std::max(dg, 0.0);
    tables->g_dec[k] = tables->g_dec[k - 1] + std::min(dg, 0.0);
    if (dg < -1e-15) tables->monotone = false;
  }
  tables->K = lip;
  tables->h0 = h_min;
  if (!(h_min > 0.0) || !std::isfinite(h_min)) {
    throw DomainError("damping h must satisfy h(u) >= h0 > 0; sampled minimum is " +
                      std::to_string(h_min));
  }
  tables_ = std::move(tables);
}

double FluxModel::lambda1(double u) const {
  return fluid_.mu1 / std::max(relperm_.kr1(clamp01(u)), relperm_.k_reg);
}

double FluxModel::lambda2(double u) const {
  return fluid_.mu2 / std::max(relperm_.kr2(clamp01(u)), relperm_.k_reg);
}

double FluxModel::g_raw(double u) const {
  if (mode_ == FluxMode::simple) {
    // Mobility form avoids 0/0 where one rel-perm vanishes.
    double psi1 = relperm_.kr1(u) / fluid_.mu1;
    double psi2 = relperm_.kr2(u) / fluid_.mu2;
    if (psi1 + psi2 <= 0.0) {
      psi1 = std::max(relperm_.kr1(u), relperm_.k_reg) / fluid_.mu1;
      psi2 = std::max(relperm_.kr2(u), relperm_.k_reg) / fluid_.mu2;
    }
    return psi1 / (psi1 + psi2);
  }
  const double big1 = 1.0 / series_sum(lambda1(u), fluid_.nu);
  const double big2 = 1.0 / series_sum(lambda2(u), fluid_.nu);
  return big2 / (big1 + big2);
}

double FluxModel::h_raw(double u) const {
  if (mode_ == FluxMode::simple) {
    double psi1 = relperm_.kr1(u) / fluid_.mu1;
    double psi2 = relperm_.kr2(u) / fluid_.mu2;
    if (psi1 + psi2 <= 0.0) {
      psi1 = std::max(relperm_.kr1(u), relperm_.k_reg) / fluid_.mu1;
      psi2 = std::max(relperm_.kr2(u), relperm_.k_reg) / fluid_.mu2;
    }
    return 2.0 / (psi1 + psi2);
  }
  const double l1 = lambda1(u);
  const double l2 = lambda2(u);
  const double big1 = 1.0 / series_sum(l1, fluid_.nu);
  const double big2 = 1.0 / series_sum(l2, fluid_.nu);
  return (l1 * big2 + l2 * big1) / (big1 + big2);
}

double FluxModel::g(double u) const { return g_raw(clamp01(u)); }

double FluxModel::h(double u) const { return h_raw(clamp01(u)); }

double FluxModel::gprime(double u) const {
  if (u < 0.0 || u > 1.0) return 0.0;
  constexpr double step = 1e-4;
  if (u >= 2.0 * step && u <= 1.0 - 2.0 * step) {
    return (g_raw(u - 2 * step) - 8.0 * g_raw(u - step) + 8.0 * g_raw(u + step) -
            g_raw(u + 2 * step)) /
           (12.0 * step);
  }
  constexpr double edge = 1e-6;
  if (u < 0.5) {
    return (-3.0 * g_raw(u) + 4.0 * g_raw(u + edge) - g_raw(u + 2 * edge)) / (2 * edge);
  }
  return (3.0 * g_raw(u) - 4.0 * g_raw(u - edge) + g_raw(u - 2 * edge)) / (2 * edge);
}

double FluxModel::interpolate(const std::vector<double>& table, double u) const {
  u = clamp01(u);
  const double x = u * kSampleIntervals;
  const int k = std::min(static_cast<int>(x), kSampleIntervals - 1);
  const double w = x - k;
  return (1.0 - w) * table[k] + w * table[k + 1];
}

double FluxModel::g_increasing_part(double u) const {
  if (tables_->monotone) return g(u) - g(0.0);
  return interpolate(tables_->g_inc, u);
}

double FluxModel::g_decreasing_part(double u) const {
  if (tables_->monotone) return 0.0;
  return interpolate(tables_->g_dec, u);
}

double FluxModel::g_min(double a, double b) const {
  if (a > b) std::swap(a, b);
  double m = std::min(g(a), g(b));
  if (tables_->monotone) return m;
  const int lo = static_cast<int>(std::ceil(clamp01(a) * kSampleIntervals));
  const int hi = static_cast<int>(std::floor(clamp01(b) * kSampleIntervals));
  for (int k = lo; k <= hi; ++k) m = std::min(m, tables_->g[k]);
  return m;
}

double FluxModel::g_max(double a, double b) const {
  if (a > b) std::swap(a, b);
  double m = std::max(g(a), g(b));
  if (tables_->monotone) return m;
  const int lo = static_cast<int>(std::ceil(clamp01(a) * kSampleIntervals));
  const int hi = static_cast<int>(std::floor(clamp01(b) * kSampleIntervals));
  for (int k = lo; k <= hi; ++k) m = std::max(m, tables_->g[k]);
  return m;
}

DerivedConstants derived_constants(const FluxModel& model) {
  return DerivedConstants{model.K(), model.h0(), FluxModel::kSampleIntervals + 1};
}

EntropyFamily parse_entropy_family(std::string_view text) {
  if (text == "kruzhkov") return EntropyFamily::kruzhkov;
  if (text == "plus") return EntropyFamily::plus;
  if (text == "minus") return EntropyFamily::minus;
  if (text == "square") return EntropyFamily::square;
  throw DomainError("unknown entropy family '" + std::string(text) + "'");
}

EntropyPair::EntropyPair(EntropyFamily family, double v, FluxModel model)
    : family_(family), v_(v), model_(std::move(model)) {}

double EntropyPair::eta(double u) const {
  switch (family_) {
    case EntropyFamily::kruzhkov: return std::abs(u - v_);
    case EntropyFamily::plus: return std::max(u - v_, 0.0);
    case EntropyFamily::minus: return std::max(v_ - u, 0.0);
    case EntropyFamily::square: return u * u;
  }
  return 0.0;
}

double EntropyPair::eta_prime(double u) const {
  switch (family_) {
    case EntropyFamily::kruzhkov: return sgn(u - v_);
    case EntropyFamily::plus: return sgn_plus(u - v_);
    case EntropyFamily::minus: return sgn_minus(u - v_);
    case EntropyFamily::square: return 2.0 * u;
  }
  return 0.0;
}

double EntropyPair::q(double u) const {
  const double dg = model_.g(u) - model_.g(v_);
  switch (family_) {
    case EntropyFamily::kruzhkov: return sgn(u - v_) * dg;
    case EntropyFamily::plus: return sgn_plus(u - v_) * dg;
    case EntropyFamily::minus: return sgn_minus(u - v_) * dg;
    case EntropyFamily::square: {
      // q(u) = int_0^u 2 s g'(s) ds = 2 u g(u) - 2 int_0^u g, with g' = 0 off [0, 1].
      const double w = clamp01(u);
      if (w <= 0.0) return 0.0;
      const double area = gauss_legendre([this](double s) { return model_.g(s); }, 0.0, w);
      return 2.0 * w * model_.g(w) - 2.0 * area;
    }
  }
  return 0.0;
}

EntropyPair make_entropy_pair(EntropyFamily family, double v, const FluxModel& model) {
  return EntropyPair(family, v, model);
}

}  // namespace blsim
