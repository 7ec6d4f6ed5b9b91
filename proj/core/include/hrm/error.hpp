#pragma once

#include <stdexcept>
#include <string>

namespace hrm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is missing, unknown, unparsable or out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller-provided data (tokens, actions, files) is invalid.
class InputError : public Error {
 public:
  using Error::Error;
};

/// An API was used in a way its contract forbids.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint file cannot be read or does not match the expected model.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace hrm
