#pragma once

#include <stdexcept>
#include <string>

namespace svddlab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes incompatible with an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or precondition violated by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/inf encountered in a computation that requires finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File read/write failures. Messages carry the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace svddlab
