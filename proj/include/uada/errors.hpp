#pragma once

#include <stdexcept>
#include <string>

namespace uada {

/// Invalid or inconsistent configuration (unknown key, bad registry, shape mismatch in a spec).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (level out of range, label out of range).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data (bad magic, truncated payload, checksum mismatch).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unsupported file-format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Training diverged (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace uada
