#pragma once

#include <stdexcept>
#include <string>

namespace gradorth {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or length mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, SVD non-convergence, degenerate inputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or incomplete configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized artifact (matrix, network, subspace files).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Operation not permitted in the current object state, e.g. mutating a frozen network.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace gradorth
