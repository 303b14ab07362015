#pragma once

#include <stdexcept>
#include <string>

namespace otmask {

/// Rejected input: malformed files, violated preconditions, bad configuration.
/// The CLI maps this to exit status 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Non-finite intermediate values in a numerical routine.
class NumericalError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A state that valid inputs can never produce. The CLI maps this to exit status 2.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace otmask
