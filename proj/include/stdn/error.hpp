#pragma once

#include <stdexcept>
#include <string>

namespace stdn {

// Root of every error the library throws. The CLI maps the concrete
// subclasses onto exit codes, so new failure modes should derive from the
// closest existing category instead of from this class directly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or sizes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in an input or a loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse: backward on a non-scalar, label out of range, bad config.
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Container parse failures. Each has its own type so callers can tell a
// foreign file from a damaged one.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class MagicMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

class DuplicateNameError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace stdn
