#pragma once

#include <stdexcept>
#include <string>

namespace pqspectra {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the inputs was violated (bad sizes, exponents, weights, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A run configuration could not be parsed or is inconsistent.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// The Nehari scaling has no positive solution: lambda*T3(v) - T2(v) <= 0.
class NoScalingWitness : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

/// Probe evidence contradicted a nonexistence claim.
class CertificationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace pqspectra
