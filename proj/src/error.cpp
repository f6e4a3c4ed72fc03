// SPDX-License-Identifier: Apache-2.0
#include "pillarstat/error.hpp"

namespace pillarstat {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::MalformedRecordLength: return "MalformedRecordLength";
    case ErrorKind::MissingKey: return "MissingKey";
    case ErrorKind::MatrixShapeError: return "MatrixShapeError";
    case ErrorKind::FieldCountError: return "FieldCountError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinitePrediction: return "NonFinitePrediction";
    case ErrorKind::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorKind::FrameMismatch: return "FrameMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace pillarstat
