#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slimq {

enum class ErrorCode {
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  PayloadSizeMismatch,
  NonFiniteValue,
  IoFailure,
  ShapeMismatch,
  BadGroupSize,
  EmptyCalibration,
  InsufficientCalibration,
  NotPositiveDefinite,
  NonFiniteIntermediate,
  InconsistentPlan,
  CorruptOffsets,
  CodeOutOfRange,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// All library failures surface as this exception; code() identifies the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace slimq
