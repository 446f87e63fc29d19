#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gazeid {

enum class ErrorCode {
  kInvalidArgument,
  kDomain,
  kDegenerateRecording,
  kChannelUnavailable,
  kDegenerateSample,
  kNonConvergence,
  kNonFinite,
  kDimensionMismatch,
  kInsufficientData,
  kParse,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDomain: return "domain_error";
    case ErrorCode::kDegenerateRecording: return "degenerate_recording";
    case ErrorCode::kChannelUnavailable: return "channel_unavailable";
    case ErrorCode::kDegenerateSample: return "degenerate_sample";
    case ErrorCode::kNonConvergence: return "non_convergence";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

/// Library-wide exception. The message is a single line so the CLI can
/// forward it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace gazeid
