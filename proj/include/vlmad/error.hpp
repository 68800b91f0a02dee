#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlmad {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  // preprocess
  kDecodeFailed,
  kUnsupportedFormat,
  kEmptyCloud,
  kNonFiniteCoordinate,
  kTooFewSamples,
  kNonFiniteValue,
  kMixedFrameSizes,
  kEmptyFrameList,
  // prompt-engine
  kMissingComponent,
  kExtraComponent,
  // backend
  kAuthMissing,
  kRateLimitedExhausted,
  kTransport,
  kBadStatus,
  kFixtureMiss,
  // parser
  kUnparseable,
  // dataset
  kEmptyDataset,
  kCategoryMissingTrain,
  // metrics
  kLengthMismatch,
  kEmpty,
  // harness
  kConfigInvalid,
  kDatasetError,
};

// Stable upper-snake name, e.g. "FIXTURE_MISS".
std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vlmad
