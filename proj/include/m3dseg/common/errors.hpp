#pragma once

#include <stdexcept>

namespace m3dseg {

/// Invalid user input: configs, flags, malformed or mismatched files.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad magic, unsupported version or checksum mismatch in a persisted file.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Filesystem failure: missing file, unreadable or unwritable path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace m3dseg
