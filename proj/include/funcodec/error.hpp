#pragma once

#include <stdexcept>
#include <string>

namespace funcodec {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed data that violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Object is not in a state that permits the call (e.g. uninitialized codebook).
class StateError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf or a vanishing denominator.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Model or job configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Encoded stream and the decoding configuration disagree.
class MismatchError : public Error {
 public:
  using Error::Error;
};

// Binary container errors (.fcs streams and .fcq codebook files).
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MalformedError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace funcodec
