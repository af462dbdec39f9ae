#include "slimq/error.hpp"

namespace slimq {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::PayloadSizeMismatch: return "PayloadSizeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadGroupSize: return "BadGroupSize";
    case ErrorCode::EmptyCalibration: return "EmptyCalibration";
    case ErrorCode::InsufficientCalibration: return "InsufficientCalibration";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NonFiniteIntermediate: return "NonFiniteIntermediate";
    case ErrorCode::InconsistentPlan: return "InconsistentPlan";
    case ErrorCode::CorruptOffsets: return "CorruptOffsets";
    case ErrorCode::CodeOutOfRange: return "CodeOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace slimq
