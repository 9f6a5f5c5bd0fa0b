// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lol {

/// Operand shapes do not fit the operation (dimension mismatch, structure mismatch).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is valid in principle but exceeds what the implementation supports (size caps).
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A container file does not match its declared format. Carries the byte offset
/// at which parsing failed.
class ParseError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, shape_overflow, bad_value };

  ParseError(Kind kind, std::uint64_t offset, const std::string& what)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

/// A metric was requested on data that cannot define it (e.g. fewer than two items).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A non-finite value appeared during a numerical procedure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lol
