#pragma once

#include <stdexcept>
#include <string>

namespace eows {

// Malformed or out-of-contract input. The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All points coincide, zero matrix where a scale is needed, and similar.
class DegenerateInput : public InputError {
 public:
  using InputError::InputError;
};

// Solver failure or non-finite intermediate. The CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

}  // namespace eows
