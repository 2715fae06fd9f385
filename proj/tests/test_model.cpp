#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "blsim/errors.hpp"
#include "blsim/model.hpp"

using namespace blsim;

namespace {

// Direct summation of 1/(lambda + n^2 nu) over |n| <= N plus the integral tail.
double truncated_series(double lambda, double nu) {
  const long N = 2000000;
  double s = 1.0 / lambda;
  for (long n = N; n >= 1; --n) s += 2.0 / (lambda + static_cast<double>(n) * n * nu);
  const double a = std::sqrt(lambda / nu);
  // 2 * int_{N+1/2}^inf dx / (lambda + nu x^2)
  s += 2.0 / std::sqrt(lambda * nu) * (std::numbers::pi / 2 - std::atan((N + 0.5) / a));
  return s;
}

FluxModel corey2() { return FluxModel(FluidParams{}, RelPermModel{}, FluxMode::simple); }

}  // namespace

TEST_CASE("closed-form series matches direct summation") {
  for (double lambda : {0.1, 1.0, 10.0})
    for (double nu : {0.1, 1.0, 10.0}) {
      const double a = series_sum(lambda, nu);
      const double b = truncated_series(lambda, nu);
      CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, b));
    }
  CHECK_THROWS_AS(series_sum(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(series_sum(1.0, -1.0), DomainError);
}

TEST_CASE("quadratic Corey flux with equal viscosities") {
  const FluxModel m = corey2();
  for (double u : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
    const double a = u * u, b = (1 - u) * (1 - u);
    CHECK(m.g(u) == doctest::Approx(a / (a + b)).epsilon(1e-12));
    CHECK(m.h(u) == doctest::Approx(2.0 / (a + b)).epsilon(1e-12));
  }
  CHECK(m.g(0.5) == doctest::Approx(0.5));
  CHECK(m.K() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(m.h0() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(m.monotone());
  // Frozen outside [0, 1].
  CHECK(m.g(-0.5) == m.g(0.0));
  CHECK(m.g(1.5) == m.g(1.0));
  CHECK(m.gprime(1.5) == 0.0);
}

TEST_CASE("g' agrees with a central difference") {
  const FluxModel m = corey2();
  for (double u : {0.2, 0.45, 0.8}) {
    const double d = 1e-6;
    CHECK(m.gprime(u) == doctest::Approx((m.g(u + d) - m.g(u - d)) / (2 * d)).epsilon(1e-5));
  }
}

TEST_CASE("unequal viscosities shift the flux") {
  FluidParams f;
  f.mu1 = 1.0;
  f.mu2 = 5.0;
  const FluxModel m(f, RelPermModel{}, FluxMode::simple);
  const double u = 0.4, p1 = u * u / 1.0, p2 = (1 - u) * (1 - u) / 5.0;
  CHECK(m.g(u) == doctest::Approx(p1 / (p1 + p2)));
  CHECK(m.h(u) == doctest::Approx(2.0 / (p1 + p2)));
}

TEST_CASE("series mode is built from the closed-form sums") {
  FluidParams f;
  f.nu = 0.5;
  const FluxModel m(f, RelPermModel{}, FluxMode::series);
  const double u = 0.3;
  const double l1 = f.mu1 / (u * u), l2 = f.mu2 / ((1 - u) * (1 - u));
  const double b1 = 1.0 / truncated_series(l1, f.nu), b2 = 1.0 / truncated_series(l2, f.nu);
  CHECK(m.g(u) == doctest::Approx(b2 / (b1 + b2)).epsilon(1e-9));
  CHECK(m.h0() > 0.0);
}

TEST_CASE("linear and tabulated rel-perms") {
  RelPermModel lin;
  lin.kind = RelPermKind::linear;
  const FluxModel m(FluidParams{}, lin, FluxMode::simple);
  CHECK(m.g(0.25) == doctest::Approx(0.25));
  CHECK(m.K() == doctest::Approx(1.0).epsilon(1e-9));

  RelPermModel tab;
  tab.kind = RelPermKind::tabulated;
  tab.table = {{0.0, 0.0, 1.0}, {0.5, 0.25, 0.25}, {1.0, 1.0, 0.0}};
  const FluxModel t(FluidParams{}, tab, FluxMode::simple);
  CHECK(t.g(0.5) == doctest::Approx(0.5));
  CHECK(tab.kr1(0.25) == doctest::Approx(0.125));

  RelPermModel bad = tab;
  bad.table = {{0.0, 0.0, 1.0}, {0.5, 0.3, 0.25}, {0.4, 1.0, 0.0}};
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("invalid parameters are refused") {
  FluidParams f;
  f.mu1 = 0.0;
  CHECK_THROWS_AS(FluxModel(f, RelPermModel{}, FluxMode::simple), DomainError);
  f = FluidParams{};
  f.nu = -1.0;
  CHECK_THROWS_AS(f.validate(), DomainError);
  CHECK_THROWS_AS(parse_flux_mode("spectral"), DomainError);
  CHECK(parse_relperm_kind("linear") == RelPermKind::linear);
}

TEST_CASE("sign conventions") {
  CHECK(sgn_plus(0.0) == 0.0);
  CHECK(sgn_plus(1e-300) == 1.0);
  CHECK(sgn_minus(-2.0) == -1.0);
  CHECK(sgn_minus(0.0) == 0.0);
  CHECK(sgn(0.0) == 0.0);
}

TEST_CASE("entropy fluxes satisfy q' = eta' g'") {
  const FluxModel m = corey2();
  for (EntropyFamily fam : {EntropyFamily::kruzhkov, EntropyFamily::plus, EntropyFamily::minus,
                            EntropyFamily::square}) {
    const EntropyPair e = make_entropy_pair(fam, 0.4, m);
    for (double u : {0.1, 0.3, 0.6, 0.9}) {
      const double d = 1e-6;
      const double dq = (e.q(u + d) - e.q(u - d)) / (2 * d);
      CHECK(dq == doctest::Approx(e.eta_prime(u) * m.gprime(u)).epsilon(1e-4));
    }
    if (fam != EntropyFamily::square) CHECK(e.q(0.4) == 0.0);
  }
  const EntropyPair k = make_entropy_pair(EntropyFamily::kruzhkov, 0.4, m);
  CHECK(k.eta(0.1) == doctest::Approx(0.3));
  CHECK(k.q(0.9) == doctest::Approx(m.g(0.9) - m.g(0.4)));
  CHECK(k.q(0.1) == doctest::Approx(m.g(0.4) - m.g(0.1)));
}
