#pragma once

#include <stdexcept>

namespace mvngeo {

/// Base class for the library's typed failures. Invalid arguments (dimension
/// mismatches, out-of-range parameters) throw std::invalid_argument instead;
/// these types are reserved for conditions that depend on the numerical
/// content of the inputs.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A matrix required to be positive definite has an eigenvalue at or below
/// 1e-12 times its largest.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

/// A matrix required to be positive semi-definite has an eigenvalue below
/// -1e-10 times its largest.
struct NegativeSpectrum : Error {
  using Error::Error;
};

/// A computation produced non-finite values (typically a matrix exponential
/// evaluated far outside the representable range).
struct NumericalOverflow : Error {
  using Error::Error;
};

/// Random direction draws stayed linearly dependent for 100 retries.
struct DegenerateDraw : Error {
  using Error::Error;
};

/// A matrix required to be orthonormal is not, beyond tolerance 1e-10.
struct NotOrthogonal : Error {
  using Error::Error;
};

/// The small-velocity approximation is undefined because the target
/// covariance has an eigenvalue within 1e-10 of 1. Callers fall back to
/// another residual kind.
struct SingularTaylor : Error {
  using Error::Error;
};

/// A closed-form solve was requested for a target that classifies as general.
struct NotSpecialCase : Error {
  using Error::Error;
};

}  // namespace mvngeo
