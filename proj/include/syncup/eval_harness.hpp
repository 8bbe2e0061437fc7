#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "syncup/audio_beats.hpp"
#include "syncup/motion_model.hpp"
#include "syncup/pose_similarity.hpp"
#include "syncup/scoring.hpp"
#include "syncup/tracker.hpp"

namespace syncup {

enum class MotionModel { kPeriodicLimbSwing, kStepSequence };
std::string_view to_string(MotionModel m);
MotionModel motion_model_from_string(std::string_view s);

struct Perturbation {
  double time_shift_ms = 0.0;     // positive: dancer lags the choreography
  double angular_noise_sd = 0.0;  // radians, per part and frame
  double dropout_prob = 0.0;      // per keypoint and frame
};

struct SyntheticSpec {
  std::size_t dancer_count = 2;
  double fps = 30.0;
  double duration_ms = 20000.0;
  double bpm = 120.0;
  MotionModel motion = MotionModel::kStepSequence;
  std::vector<Perturbation> perturbations;  // one per dancer; missing entries are clean
  bool crossing = false;                    // dancers 0 and 1 swap places mid-recording

  const Perturbation& perturbation(std::size_t dancer) const;
  void validate() const;
};

// `key = value` lines; list values are comma separated, one entry per dancer.
//   dancers, fps, duration_ms, bpm, motion, shifts_ms, angular_noise_sd, dropout, crossing
SyntheticSpec parse_synthetic_spec(std::string_view text);

struct GroundTruth {
  // identity[f][k]: dancer shown by skeleton k of frame f in the group recording.
  std::vector<std::vector<std::size_t>> identity;
  std::vector<double> time_shift_ms;
  // angular_deviation[j][f][i]: injected angle noise of part i (radians).
  std::vector<std::vector<std::array<double, kNumParts>>> angular_deviation;
  // dropped[j][f]: number of keypoints dropped to confidence 0.
  std::vector<std::vector<std::size_t>> dropped;
  BeatGrid beats;
};

struct SyntheticSession {
  Recording group;                    // skeleton order shuffled per frame
  std::vector<Recording> individual;  // one single-dancer recording per dancer
  GroundTruth truth;
};

// Deterministic in (spec, seed).
SyntheticSession generate(const SyntheticSpec& spec, std::uint64_t seed);

// Tracked identity k -> generator dancer, by majority over frames.
std::vector<std::size_t> identity_mapping(const SyntheticSession& session,
                                          const TrackedSequence& tracked);

// Fraction of (frame, identity) entries whose skeleton belongs to the
// dancer that identity maps to in the first frame.
double tracking_accuracy(const SyntheticSession& session, const TrackedSequence& tracked);

struct MetricSummary {
  double rmse = 0.0;
  std::optional<double> pearson_r;
  std::optional<double> p_value;
};

// Throws DegenerateVariance when either series is constant.
MetricSummary evaluate_metrics(std::span<const double> predictions,
                               std::span<const double> truth);

struct AlignmentEval {
  std::size_t segments = 0;   // (segment, follower) pairs evaluated
  std::size_t recovered = 0;  // |tau - truth| <= one frame
  std::size_t failed = 0;     // alignment raised an error for the follower
  double mean_abs_error_ms = 0.0;

  double fraction() const {
    return segments ? static_cast<double>(recovered) / static_cast<double>(segments) : 0.0;
  }
};

// Tracks the group recording, segments on the true beat grid and compares
// every follower's per-segment tau with its injected shift relative to dancer 0.
AlignmentEval evaluate_alignment(const SyntheticSession& session,
                                 std::size_t n_bins = kDefaultBins);

enum class RatingLabel { kLinear, kAddition };

// Synthetic regression data: label = clamp(1 - mean(bpd)) or the addition
// formula at `lambda`. Samples are spread round-robin over `sources` sources.
RatingDataset synthetic_rating_dataset(std::size_t samples, std::size_t sources,
                                       std::uint64_t seed, RatingLabel label = RatingLabel::kLinear,
                                       double lambda = kDefaultLambda);

// Click track: decaying 1 kHz bursts at every beat of `grid`.
AudioClip click_track(const BeatGrid& grid, double duration_ms, double sample_rate = 22050.0,
                      double offset_ms = 0.0);

}  // namespace syncup
