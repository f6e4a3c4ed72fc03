// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace pillarstat {

enum class ErrorKind {
  IoFailure,
  MalformedRecordLength,
  MissingKey,
  MatrixShapeError,
  FieldCountError,
  ParseError,
  UnsupportedFormat,
  DimensionMismatch,
  NonFinitePrediction,
  EmptyGroundTruth,
  FrameMismatch,
  ConfigError,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

/// Exception carrying a machine-checkable kind. Line numbers are 1-based, 0 when not applicable.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, int line = 0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), line_(line) {}

  ErrorKind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  int line_;
};

}  // namespace pillarstat
