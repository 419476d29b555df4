#pragma once

#include <stdexcept>
#include <string>

namespace symrel {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two operands disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value is numerically degenerate (zero norm, modulus below floor, NaN).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input data. Maps to CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// Bad configuration or flag values. Maps to CLI exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during optimization. Maps to CLI exit code 3.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace symrel
