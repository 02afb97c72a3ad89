#pragma once

#include <stdexcept>

namespace fairreg {

// Bad input: malformed files, violated preconditions, dimension mismatches.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The numerics failed: singular systems, non-finite objectives, broken
// monotonicity guarantees.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fairreg
