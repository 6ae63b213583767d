#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sdlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter lies outside its admissible range (θ ∉ (0,1/2), d < 3, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Point evaluation hit the Hardy singularity without regularization.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Mollifier radius too small to be resolved by the grid.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Invalid run/experiment configuration (CFL violation, missing metadata).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed; carries the residual history.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}

  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

/// Power iteration did not converge; carries the last iterate.
class IterationError : public Error {
 public:
  IterationError(const std::string& what, double last_estimate,
                 std::vector<double> last_iterate)
      : Error(what),
        last_estimate_(last_estimate),
        last_iterate_(std::move(last_iterate)) {}

  double last_estimate() const noexcept { return last_estimate_; }
  const std::vector<double>& last_iterate() const noexcept {
    return last_iterate_;
  }

 private:
  double last_estimate_;
  std::vector<double> last_iterate_;
};

/// Arithmetic overflow that the scaled evaluation could not recover from.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Manifest validation failure; names the offending field.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace sdlab
