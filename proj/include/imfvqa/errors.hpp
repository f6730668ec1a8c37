#pragma once

#include <stdexcept>
#include <string>

namespace imfvqa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called in the wrong state (e.g. backward without forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Text could not be parsed; the message carries line/field context.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Configuration is missing or malformed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File on disk is truncated or otherwise unreadable.
class CorruptFileError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A remote endpoint failed (timeout, HTTP status, malformed reply).
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace imfvqa
