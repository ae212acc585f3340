// Error taxonomy shared by the whole toolkit.
//
// Every category maps to a distinct CLI exit code (see tools/main.cpp):
//   InputError -> 2, ConfigError -> 3, FormatError -> 4, everything else -> 5
// (stage failures), uncategorized std::exception -> 1.

#pragma once

#include <stdexcept>
#include <string>

namespace vospipe {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension or geometry mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (capacities, k, scales, thresholds...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked on an object in the wrong state (e.g. empty bank).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Frame indices fed out of order.
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, wrong PNG color type...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure or truncated payload.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Missing or unusable pipeline inputs (absent first-frame mask, empty dir).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A pluggable component violated its contract (e.g. refiner output size).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace vospipe
