#pragma once

#include <stdexcept>
#include <string>

namespace qdiff {

// Exit-code contract used by the CLI:
//   0 ok, 1 check failure, 2 input validation, 3 mathematical precondition, 4 I/O.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

/// Malformed input: bad JSON, wrong shapes, support violations.
class ValidationError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// A mathematical precondition does not hold (resonance, point on a theta zero, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Spectra collide modulo q^Z; names the offending pair.
class ResonanceError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Truncation window too small or a numerical self-check failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace qdiff
