#pragma once

#include <stdexcept>
#include <string>

namespace ebm {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not line up: subset mask wider than the configuration,
// parameter vectors of the wrong length, mixed site counts.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A precondition on values was violated (zero probability where strict
// positivity is required, saturated magnetisation, bad order argument).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Refusal to enumerate or allocate beyond the configured desk-scale limits.
class LimitError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or failure to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or input files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ebm
