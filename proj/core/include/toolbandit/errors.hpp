#pragma once

#include <stdexcept>
#include <string>

namespace toolbandit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vector or matrix does not have the dimension the receiver declared.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Maintained statistics are numerically corrupted (lost positive definiteness).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Selection was requested over an empty valid-action set.
class ArmsExhausted : public Error {
 public:
  ArmsExhausted() : Error("arms exhausted: valid action set is empty") {}
};

/// A caller broke the episode protocol, e.g. selected an action outside the valid set.
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

/// A context source could not serve the requested step. The episode is aborted.
class ContextUnavailable : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The message names the line and the field.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace toolbandit
