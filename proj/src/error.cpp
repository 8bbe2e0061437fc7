#include "syncup/error.hpp"

namespace syncup {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kNonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::kBadKeypointCount: return "BadKeypointCount";
    case ErrorCode::kEmptyRecording: return "EmptyRecording";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kAudioTooShort: return "AudioTooShort";
    case ErrorCode::kEnvelopeTooShort: return "EnvelopeTooShort";
    case ErrorCode::kNoTempoFound: return "NoTempoFound";
    case ErrorCode::kTooFewBeats: return "TooFewBeats";
    case ErrorCode::kLowCorrelation: return "LowCorrelation";
    case ErrorCode::kUntrainedModel: return "UntrainedModel";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kTooFewRatings: return "TooFewRatings";
    case ErrorCode::kSingleSource: return "SingleSource";
    case ErrorCode::kInsufficientContext: return "InsufficientContext";
    case ErrorCode::kSegmentCountMismatch: return "SegmentCountMismatch";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kDegenerateVariance: return "DegenerateVariance";
    case ErrorCode::kMissingBeats: return "MissingBeats";
    case ErrorCode::kInvalidState: return "InvalidState";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& message,
                    const std::string& stage) {
  std::string out;
  if (!stage.empty()) out += "[" + stage + "] ";
  out += std::string(to_string(code));
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string stage)
    : std::runtime_error(compose(code, message, stage)),
      code_(code),
      stage_(std::move(stage)),
      detail_(message) {}

Error Error::with_stage(std::string stage) const {
  return Error(code_, detail_, std::move(stage));
}

}  // namespace syncup
