#pragma once

#include <stdexcept>
#include <string>

namespace augnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation produced NaN or infinity, or received an invalid numeric argument.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument outside an operation's domain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the gradient tape (double backward, mixed tapes, non-scalar seed).
class TapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed checkpoint or dataset container.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Evaluation metric is undefined for the given model outputs.
class DegenerateMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace augnet
