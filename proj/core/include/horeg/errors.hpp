#pragma once

#include <stdexcept>
#include <string>

namespace horeg {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// HᵀH + R is numerically singular.
struct SingularSum : Error {
  using Error::Error;
};

/// Spectral radius of the regularization factor is out of the contractive range.
struct SpectralViolation : Error {
  using Error::Error;
};

/// An operation needed an invertible Gram matrix and did not get one.
struct SingularGram : Error {
  using Error::Error;
};

/// A regularization strategy cannot be materialized for the given problem.
struct InvalidStrategy : Error {
  using Error::Error;
};

/// A matrix required to be positive semidefinite has a meaningfully negative eigenvalue.
struct NonPsd : Error {
  using Error::Error;
};

/// Accumulated state is too ill-conditioned for the requested operation.
struct IllConditioned : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// step() called on a terminated environment.
struct StepAfterTerminal : Error {
  using Error::Error;
};

/// A statistic was requested on too few samples.
struct InsufficientData : Error {
  using Error::Error;
};

/// A configuration file or flag could not be understood.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace horeg
