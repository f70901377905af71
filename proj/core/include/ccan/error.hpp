#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccan {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration value (model topology, sampler, schema) is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse: non-scalar loss, label out of range, mismatched state.
class UsageError : public Error {
 public:
  using Error::Error;
};

// A binary or text file does not match its documented layout.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Retrieval evaluation could not produce a report.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccan
