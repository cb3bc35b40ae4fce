#pragma once

#include <stdexcept>
#include <string>

namespace dualiv {

// Bad input: wrong shapes, out-of-range parameters, violated preconditions.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A linear system or factorization that could not be solved to a finite answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset, model, or config file. The message carries the location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dualiv
