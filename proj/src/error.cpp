#include "homofuse/error.hpp"

namespace homofuse {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDegenerateProjection: return "degenerate projection";
    case ErrorCode::kSingularChart: return "singular chart";
    case ErrorCode::kSingularSystem: return "singular system";
    case ErrorCode::kSampleStarvation: return "sample starvation";
    case ErrorCode::kDegenerateRegion: return "degenerate region";
    case ErrorCode::kNoAdmittedFrames: return "no admitted frames";
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kTruncatedPayload: return "truncated payload";
    case ErrorCode::kDimensionOverflow: return "dimension overflow";
    case ErrorCode::kIoError: return "i/o error";
    case ErrorCode::kInsufficientFrames: return "insufficient frames";
    case ErrorCode::kTextureTooSmall: return "texture too small";
  }
  return "unknown";
}

}  // namespace homofuse
