#pragma once

#include <stdexcept>
#include <string>

namespace warpgrad {

// Bad input: malformed data, dimension mismatch, out-of-range knobs.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The constraint set admits no warp.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A factorization or solve broke down.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace warpgrad
