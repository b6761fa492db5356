#pragma once

#include <stdexcept>
#include <string>

namespace csddp {

/// Base for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or mismatched file contents.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Unsupported file format version.
class VersionError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or engine parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace csddp
