/**
 * Copyright 2026 The timix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TIMIX_ERROR_HPP_
#define TIMIX_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace timix {

enum class ErrorKind {
  NonDivisible,
  GridTooSmall,
  OutOfBounds,
  IndexOutOfRange,
  DimensionMismatch,
  LengthMismatch,
  NonFiniteScore,
  WindowTooLarge,
  ShapeMismatch,
  ZeroNorm,
  BatchTooSmall,
  WeightSumViolation,
  DegenerateMarginal,
  AlphabetTooLarge,
  InvalidSpec,
  InvalidArgument,
  MissingFile,
  BadDimensions,
  SchemaError,
  VersionMismatch,
  IoError,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonDivisible: return "NonDivisible";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonFiniteScore: return "NonFiniteScore";
    case ErrorKind::WindowTooLarge: return "WindowTooLarge";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ZeroNorm: return "ZeroNorm";
    case ErrorKind::BatchTooSmall: return "BatchTooSmall";
    case ErrorKind::WeightSumViolation: return "WeightSumViolation";
    case ErrorKind::DegenerateMarginal: return "DegenerateMarginal";
    case ErrorKind::AlphabetTooLarge: return "AlphabetTooLarge";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::BadDimensions: return "BadDimensions";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace timix

#endif  // TIMIX_ERROR_HPP_
