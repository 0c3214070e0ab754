#pragma once

#include <stdexcept>
#include <string>

namespace groundseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated input file. The message names the offending
/// line (text formats) or byte offset (binary formats).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a function argument was violated.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (bad key, out-of-range value, inconsistent sections).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required input artifact does not exist.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (NaN or Inf loss).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace groundseg
