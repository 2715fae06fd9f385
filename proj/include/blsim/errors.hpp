#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blsim {

/// Invalid parameters or data handed to a model or grid constructor.
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Saddle-point iteration did not reach the requested tolerance.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

/// NaN, CFL violation, or another numeric breakdown inside a time step.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Requested dt exceeds the monotone bound of the transport scheme.
class CflError : public NumericError {
public:
  CflError(const std::string& what, double bound)
      : NumericError(what), bound_(bound) {}
  double bound() const noexcept { return bound_; }

private:
  double bound_;
};

/// Malformed run configuration; carries the offending line (0 if none).
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

}  // namespace blsim
