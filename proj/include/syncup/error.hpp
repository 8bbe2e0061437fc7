#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace syncup {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kMalformedRecord,
  kNonMonotonicTime,
  kBadKeypointCount,
  kEmptyRecording,
  kTooShort,
  kAudioTooShort,
  kEnvelopeTooShort,
  kNoTempoFound,
  kTooFewBeats,
  kLowCorrelation,
  kUntrainedModel,
  kTooFewSamples,
  kTooFewRatings,
  kSingleSource,
  kInsufficientContext,
  kSegmentCountMismatch,
  kNotFound,
  kVersionMismatch,
  kDegenerateVariance,
  kMissingBeats,
  kInvalidState,
};

// Machine-readable name, e.g. "BadKeypointCount".
std::string_view to_string(ErrorCode code);

// Every failure raised by the engine. `stage()` names the pipeline stage
// ("ingest", "tracking", "segmentation", ...) once the error has passed
// through the orchestrator; it is empty when raised from a module directly.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  Error with_stage(std::string stage) const;

 private:
  ErrorCode code_;
  std::string stage_;
  std::string detail_;
};

}  // namespace syncup
