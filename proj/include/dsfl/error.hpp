#pragma once

#include <stdexcept>
#include <string>

namespace dsfl {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Incompatible tensor shapes or invalid axes.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// NaN or Inf showed up where only finite values are allowed.
struct NonFiniteError : Error {
  explicit NonFiniteError(const std::string& msg) : Error(msg) {}
};

/// Malformed input values (bad labels, empty classes, degenerate scores...).
struct ValueError : Error {
  explicit ValueError(const std::string& msg) : Error(msg) {}
};

/// Corrupt, truncated or wrong-version checkpoint files, stage mismatches.
struct CheckpointError : Error {
  explicit CheckpointError(const std::string& msg) : Error(msg) {}
};

/// Bad run configuration (unknown keys, out-of-range values).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Filesystem / image decoding failures.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Training produced a non-finite loss.
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

}  // namespace dsfl
