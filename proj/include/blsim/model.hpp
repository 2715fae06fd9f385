#pragma once

// Fractional flow g(u), Brinkman damping h(u) and the entropy pairs of the
// saturation equation, built from relative permeabilities and viscosities.

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace blsim {

/// Fluid and rock parameters. Porosity, absolute permeability and the phase
/// densities are fixed to one throughout.
struct FluidParams {
  double mu1 = 1.0;
  double mu2 = 1.0;
  double nu = 0.01;   ///< effective (Brinkman) viscosity
  double tau = 1e-3;  ///< time delay in front of dv/dt

  static constexpr double porosity = 1.0;
  static constexpr double permeability = 1.0;
  static constexpr double rho1 = 1.0;
  static constexpr double rho2 = 1.0;

  void validate() const;
};

enum class RelPermKind { corey_quadratic, linear, tabulated };

/// Relative permeabilities k_r1 (phase 1, increasing) and k_r2 (decreasing).
/// `corey_quadratic` uses s^n and (1-s)^n with n = exponent (2 by default).
struct RelPermModel {
  RelPermKind kind = RelPermKind::corey_quadratic;
  double exponent = 2.0;
  /// (s, k_r1(s), k_r2(s)) rows, strictly increasing in s, covering [0, 1].
  std::vector<std::array<double, 3>> table;
  double k_reg = 1e-8;

  double kr1(double s) const;
  double kr2(double s) const;
  void validate() const;
};

enum class FluxMode { simple, series };

std::string_view to_string(RelPermKind kind);
std::string_view to_string(FluxMode mode);
RelPermKind parse_relperm_kind(std::string_view text);
FluxMode parse_flux_mode(std::string_view text);

/// Sum over all integers n of 1 / (lambda + n^2 nu), via its coth closed form.
/// Throws DomainError unless lambda > 0 and nu > 0.
double series_sum(double lambda, double nu);

/// Immutable flux model. Copies share the precomputed sample tables.
///
/// Outside [0, 1] every function is frozen at its endpoint value, so g' = 0
/// there and h keeps its positive lower bound on the whole real line.
class FluxModel {
public:
  /// Number of sample intervals used for K, h0 and the flux splitting tables.
  static constexpr int kSampleIntervals = 10000;

  FluxModel(FluidParams fluid, RelPermModel relperm, FluxMode mode);

  double g(double u) const;
  double h(double u) const;
  double gprime(double u) const;
  double lambda1(double u) const;
  double lambda2(double u) const;

  /// Lipschitz constant of g, max |g'| over the sample grid.
  double K() const { return tables_->K; }
  /// Lower bound of h over the sample grid.
  double h0() const { return tables_->h0; }
  /// True when g is nondecreasing on the sample grid.
  bool monotone() const { return tables_->monotone; }

  /// Integrals of max(g', 0) and min(g', 0) from 0 to u (flux splitting).
  double g_increasing_part(double u) const;
  double g_decreasing_part(double u) const;
  /// Min and max of g over [a, b] (order-free).
  double g_min(double a, double b) const;
  double g_max(double a, double b) const;

  const FluidParams& fluid() const { return fluid_; }
  const RelPermModel& relperm() const { return relperm_; }
  FluxMode mode() const { return mode_; }

private:
  struct Tables {
    std::vector<double> g;      // g at k / N
    std::vector<double> g_inc;  // cumulative positive increments
    std::vector<double> g_dec;  // cumulative negative increments
    double K = 0.0;
    double h0 = 0.0;
    bool monotone = true;
  };

  double g_raw(double u) const;  // u already in [0, 1]
  double h_raw(double u) const;
  double interpolate(const std::vector<double>& table, double u) const;

  FluidParams fluid_;
  RelPermModel relperm_;
  FluxMode mode_;
  std::shared_ptr<const Tables> tables_;
};

struct DerivedConstants {
  double K = 0.0;
  double h0 = 0.0;
  int sample_points = FluxModel::kSampleIntervals + 1;
};

DerivedConstants derived_constants(const FluxModel& model);

enum class EntropyFamily { kruzhkov, plus, minus, square };

EntropyFamily parse_entropy_family(std::string_view text);

/// sgn+(x) = 1 for x > 0, else 0.
inline double sgn_plus(double x) { return x > 0.0 ? 1.0 : 0.0; }
/// Derivative of |x|^- = max(-x, 0): -1 for x < 0, else 0.
inline double sgn_minus(double x) { return x < 0.0 ? -1.0 : 0.0; }
inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Convex entropy eta with flux q, q' = eta' g'.
class EntropyPair {
public:
  EntropyPair(EntropyFamily family, double v, FluxModel model);

  double eta(double u) const;
  double eta_prime(double u) const;
  double q(double u) const;

  EntropyFamily family() const { return family_; }
  double v() const { return v_; }

private:
  EntropyFamily family_;
  double v_;
  FluxModel model_;
};

EntropyPair make_entropy_pair(EntropyFamily family, double v, const FluxModel& model);

}  // namespace blsim
