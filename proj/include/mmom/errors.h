#pragma once

#include <stdexcept>
#include <string>

namespace mmom {

// Malformed or inconsistent input data (gold tags, files, records).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced by a computation, or a loss that cannot be trusted.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or argument values passed to a library call.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mmom
