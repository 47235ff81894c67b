#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rydloss {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
/// Speed of light in µm/µs.
inline constexpr double kLightSpeed = 299792.458;

/// Frequencies cross the API boundary as ν = ω/2π in MHz; internally they are rad/µs.
constexpr double mhz_to_angular(double nu_mhz) { return kTwoPi * nu_mhz; }
constexpr double angular_to_mhz(double omega) { return omega / kTwoPi; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: missing keys, out-of-range values, malformed files.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Base for failures of a numerical method on valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class PoleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// χ̄ vanishes: the caller sits on the δ₀ or δ₊ resonance.
class ResonanceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A root or extremum was not bracketed inside the search window.
class WindowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TrackingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BudgetError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace rydloss
