#pragma once

#include <stdexcept>
#include <string>

namespace demian {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed records, invalid configuration, failed
// preconditions. The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Unknown task, row, or column id.
class LookupError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Filesystem failures (missing corpus, unwritable sink).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace demian
