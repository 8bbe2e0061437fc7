#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "syncup/audio_beats.hpp"
#include "syncup/motion_model.hpp"
#include "syncup/pose_similarity.hpp"
#include "syncup/tracker.hpp"

namespace syncup {

// Keypoint displacements from frame t to t + 1.
struct PoseFlow {
  std::size_t t = 0;
  std::array<Vec2, kNumKeypoints> displacements{};
};

// Low-confidence keypoint positions are linearly interpolated from the
// nearest confident frames before differencing; carried frames stay as-is.
std::vector<PoseFlow> pose_flow(const Timeline& timeline,
                                double confidence_threshold = kDefaultConfidenceThreshold);

inline constexpr std::size_t kDefaultBins = 16;

struct Posegram {
  std::size_t n_bins = kDefaultBins;
  std::vector<double> values;  // frames x n_bins, row-major

  std::size_t frames() const { return n_bins ? values.size() / n_bins : 0; }
  double at(std::size_t t, std::size_t k) const { return values[t * n_bins + k]; }
  double bin_center(std::size_t k) const;
};

// Per frame and angular bin: total displacement magnitude of keypoints whose
// motion direction lies within 2*pi/n_bins (circularly) of the bin centre.
Posegram posegram(std::span<const PoseFlow> flow, std::size_t n_bins = kDefaultBins);

struct ImpactEnvelope {
  std::vector<double> values;          // u(t) >= 0
  std::vector<double> window_weights;  // empty unless windowed
};

// u(t) = sum over bins of |P(t) - P(t-1)|, u(0) = 0.
ImpactEnvelope impact_envelope(const Posegram& pg);

// Envelope indexed by frame: entry t reflects motion change around frame t.
// The last frame (which has no outgoing flow) gets zero.
ImpactEnvelope dancer_envelope(const Timeline& timeline, std::size_t n_bins = kDefaultBins,
                               double confidence_threshold = kDefaultConfidenceThreshold);

struct ShiftOptions {
  std::optional<double> max_shift_ms;  // overrides min(half segment, 1.5 s)
  double ambiguity_ratio = 0.95;       // secondary peaks within 5% are ambiguous
};

struct SegmentShift {
  double tau_ms = 0.0;  // positive: follower behind leader
  int shift_frames = 0;
  double peak_corr = 0.0;
  bool low_confidence = false;
};

// Gaussian-weighted normalised cross-correlation over segments s-1..s+1.
SegmentShift segment_alignment(std::span<const double> leader,
                               std::span<const double> follower,
                               std::span<const Segment> segs, std::size_t s, double fps,
                               const ShiftOptions& opts = {});

struct FollowerAlignment {
  std::size_t follower = 0;
  std::optional<SegmentShift> shift;  // nullopt when the follower failed
  std::string failure;
};

struct AlignmentResult {
  std::size_t segment = 0;
  std::size_t leader = 0;
  std::vector<FollowerAlignment> followers;
  double tau_total_ms = 0.0;  // sum of |tau_j| over aligned followers

  bool low_confidence() const;
  bool all_missing() const;
};

AlignmentResult alignment_for_segment(std::span<const ImpactEnvelope> envelopes,
                                      std::size_t leader_id, std::span<const Segment> segs,
                                      std::size_t s, double fps,
                                      const ShiftOptions& opts = {});

// Convenience overload computing envelopes from the tracked sequence.
AlignmentResult alignment_for_segment(const TrackedSequence& tracked, std::size_t leader_id,
                                      std::span<const Segment> segs, std::size_t s,
                                      std::size_t n_bins = kDefaultBins,
                                      const ShiftOptions& opts = {});

}  // namespace syncup
