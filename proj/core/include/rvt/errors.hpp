#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rvt {

// Base class for all library errors. Subclasses map onto CLI exit codes:
// ConfigError/UnsupportedError -> 2, DataError/FormatError -> 3, rest -> 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes are incompatible (e.g. matmul inner extents differ).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A configuration violates an invariant (bad stage spec, indivisible grid).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numeric-domain problem: NaN input, non-finite gradient, undefined ratio.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Out-of-range index (labels outside [0, K), row index past the end).
class IndexError : public Error {
 public:
  using Error::Error;
};

// Malformed binary file; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::uint64_t offset)
      : Error(msg + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Dataset-level problem (label/class-count mismatch, empty dataset).
class DataError : public Error {
 public:
  using Error::Error;
};

// API misuse (backward on a detached tensor, non-scalar loss).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Requested a feature that is intentionally not implemented.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace rvt
