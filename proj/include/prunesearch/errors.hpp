// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace prunesearch {

/// Base class for every error raised by the library. The CLI maps each
/// subclass onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (empty input,
/// zero denominator).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or incompatible option combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data does not conform to the model (bad token id, mask shape).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A file is malformed. `offset` is the byte position where decoding failed,
/// or -1 when the failure is not positional.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, long long offset = -1)
      : Error(offset >= 0 ? what + " (at byte " + std::to_string(offset) + ")"
                          : what),
        offset_(offset) {}
  long long offset() const noexcept { return offset_; }

 private:
  long long offset_;
};

/// Constraints cannot be satisfied (strategy clamps, scheduler budget).
class InfeasibleError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Non-finite values appeared during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A statistic is undefined for the given sample.
class StatisticsError : public Error {
 public:
  using Error::Error;
};

}  // namespace prunesearch
