#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace e2elr {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Data that parses but violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Singular systems, NaNs, disconnected networks.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (dimension mismatch, input
// outside the required set).
class ContractError : public Error {
 public:
  using Error::Error;
};

// An iterative method ran out of budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. reading gradients before backward().
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace e2elr
