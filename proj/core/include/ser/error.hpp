#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ser {

/// Failure categories shared by every module. Each one maps to a stable
/// machine-readable name (see error_code_name) used by the CLI and service.
enum class ErrorCode {
  kMalformedContainer,
  kUnsupportedEncoding,
  kEmptyAudio,
  kDomainError,
  kInsufficientSamples,
  kDegenerateFilter,
  kRateMismatch,
  kMalformedName,
  kCodeOutOfRange,
  kEmptyDataset,
  kInsufficientData,
  kShapeMismatch,
  kDegenerateBatch,
  kNonFinite,
  kInvalidTarget,
  kNonFiniteLoss,
  kInvalidArgument,
  kVersionMismatch,
  kChecksumFailure,
  kTruncatedFile,
  kIoError,
};

inline std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kMalformedContainer: return "MalformedContainer";
    case ErrorCode::kUnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::kEmptyAudio: return "EmptyAudio";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kDegenerateFilter: return "DegenerateFilter";
    case ErrorCode::kRateMismatch: return "RateMismatch";
    case ErrorCode::kMalformedName: return "MalformedName";
    case ErrorCode::kCodeOutOfRange: return "CodeOutOfRange";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kInvalidTarget: return "InvalidTarget";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kChecksumFailure: return "ChecksumFailure";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ser
