#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "syncup/audio_beats.hpp"
#include "syncup/error.hpp"
#include "syncup/motion_model.hpp"
#include "syncup/pose_similarity.hpp"
#include "syncup/temporal_alignment.hpp"
#include "syncup/tracker.hpp"

namespace syncup {

enum class Mode { kGroup, kIndividual };
std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

enum class SessionStatus { kPending, kAnalyzing, kDone, kFailed };
std::string_view to_string(SessionStatus s);
SessionStatus status_from_string(std::string_view s);

struct AnalysisConfig {
  double lambda = kDefaultLambda;
  OpsMethod method = OpsMethod::kSvr;
  std::optional<RegressorModel> model;  // required unless method is addition
  std::size_t leader = 0;               // dancer index (group mode)
  std::size_t n_bins = kDefaultBins;
  std::optional<double> max_shift_ms;
  double weight_pose = 0.5;
  double weight_time = 0.5;
  double tau_cap_ms = 500.0;
  double confidence_threshold = kDefaultConfidenceThreshold;
  double occluded_fraction = 0.25;  // share of occluded frames that flags a segment
  std::uint64_t seed = 0;
};

// One uploaded recording with whatever timing information came with it.
struct RecordingInput {
  Recording recording;
  std::optional<AudioClip> audio;
  std::optional<BeatGrid> beats;
  std::optional<double> bpm;
};

struct SessionInputs {
  Mode mode = Mode::kGroup;
  std::vector<RecordingInput> recordings;
};

struct RecordingRef {
  std::string id;
  Role role = Role::kGroup;
};

struct Session {
  std::string id;
  Mode mode = Mode::kGroup;
  int practice_index = 0;
  std::vector<RecordingRef> recordings;
  SessionStatus status = SessionStatus::kPending;
};

struct SegmentFlags {
  bool occluded = false;
  bool low_confidence_alignment = false;
  bool missing = false;

  bool operator==(const SegmentFlags&) const = default;
};

struct SegmentScore {
  std::size_t s = 0;
  double ops_mean = 0.0;
  double tau_total_ms = 0.0;
  double combined = 0.0;
  SegmentFlags flags;
};

// w_p * ops + w_t * (1 - min(1, tau / cap)).
double combined_score(double ops_mean, double tau_total_ms, const AnalysisConfig& cfg);

struct FrameResult {
  std::int64_t frame_index = 0;
  std::int64_t time_ms = 0;
  std::optional<double> ops;  // nullopt when every body part is missing
  bool occluded = false;      // at least one body part imputed
  BpdFrame bpd;
};

inline constexpr int kReportFormatVersion = 1;

struct AnalysisReport {
  std::string session_id;
  Mode mode = Mode::kGroup;
  int practice_index = 0;
  AnalysisConfig config;
  double fps = 30.0;
  std::vector<double> follower_offsets_ms;  // individual mode, per follower
  BeatGrid beats;
  std::vector<Segment> segments;
  TrackedSequence tracked;
  std::vector<FrameResult> frames;
  std::vector<AlignmentResult> alignments;  // one per segment when available
  std::vector<SegmentScore> scores;
  std::string completed_stage;
};

// Runs tracking, segmentation, pose similarity, temporal alignment and
// scoring. Errors carry the stage they were raised in.
AnalysisReport analyze_session(const SessionInputs& inputs, const AnalysisConfig& cfg,
                               std::string session_id = {}, int practice_index = 0);

struct AnalysisOutcome {
  AnalysisReport report;       // filled up to `report.completed_stage`
  std::optional<Error> error;  // set when a stage failed
};

AnalysisOutcome try_analyze_session(const SessionInputs& inputs, const AnalysisConfig& cfg,
                                    std::string session_id = {}, int practice_index = 0);

struct SpotlightList {
  std::vector<SegmentScore> entries;  // worst first, missing segments last
};

SpotlightList spotlight(const AnalysisReport& report);

struct ComparisonMatrix {
  std::vector<std::string> session_ids;
  std::vector<int> practice_indices;
  std::size_t segment_count = 0;
  std::vector<std::vector<std::optional<double>>> ops_mean;  // practice x segment
  std::vector<std::vector<std::optional<double>>> tau_total_ms;
};

ComparisonMatrix compare_practices(std::span<const AnalysisReport> reports);

}  // namespace syncup
