#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tailstop {

/// Base class for every error this library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(std::string msg, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A delta column disagrees with |cost_a - cost_b| at some line.
class DeltaMismatchError : public ParseError {
 public:
  using ParseError::ParseError;
};

class EmptyLogError : public Error {
 public:
  using Error::Error;
};

/// Top-k mean is zero, so the coefficient of variation is undefined.
class DegenerateTailError : public Error {
 public:
  using Error::Error;
};

class TooFewExceedancesError : public Error {
 public:
  using Error::Error;
};

/// Every candidate threshold was skipped during bootstrap selection.
class NoValidCandidateError : public Error {
 public:
  using Error::Error;
};

/// Optimizer non-convergence or constraint-infeasible data.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Too many bootstrap replicates failed to produce a value.
class BootstrapError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument domain violation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tailstop
