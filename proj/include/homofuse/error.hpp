#pragma once

#include <stdexcept>
#include <string>

namespace homofuse {

/// Failure classes surfaced by the library. The CLI maps each one to a
/// distinct process exit code.
enum class ErrorCode {
  kInvalidArgument,
  kDegenerateProjection,
  kSingularChart,
  kSingularSystem,
  kSampleStarvation,
  kDegenerateRegion,
  kNoAdmittedFrames,
  kMalformedHeader,
  kTruncatedPayload,
  kDimensionOverflow,
  kIoError,
  kInsufficientFrames,
  kTextureTooSmall,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace homofuse
