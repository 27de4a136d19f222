#pragma once

#include <stdexcept>
#include <string>

namespace martinbench {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a presented group cannot certify a normal form.
class NormalFormError : public Error {
 public:
  using Error::Error;
};

/// Raised when an operation needs more of an enumerated ball or ray than is available.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Raised for arguments violating an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Raised when a power series or iteration fails to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Raised for malformed configuration documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace martinbench
