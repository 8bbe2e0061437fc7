#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "syncup/motion_model.hpp"

namespace syncup {

// Spectral-flux onset strength, one value per analysis hop.
struct OnsetEnvelope {
  double hop_ms = 0.0;
  std::vector<double> values;

  double duration_ms() const { return hop_ms * static_cast<double>(values.size()); }
  // Time stamp of sample i.
  double time_ms(std::size_t i) const { return hop_ms * static_cast<double>(i); }
};

struct BeatGrid {
  std::vector<double> beat_times_ms;  // strictly increasing
  double bpm = 0.0;
};

struct Segment {
  std::size_t index = 0;
  double start_ms = 0.0;
  double end_ms = 0.0;
  std::size_t first_frame = 0;  // positions into Recording::frames
  std::size_t last_frame = 0;

  std::size_t frame_count() const { return last_frame - first_frame + 1; }
  bool operator==(const Segment&) const = default;
};

inline constexpr double kAnalysisSampleRate = 22050.0;
inline constexpr std::size_t kOnsetWindow = 2048;
inline constexpr std::size_t kOnsetHop = 512;

struct BeatTrackerOptions {
  double transition_tightness = 680.0;  // alpha in the DP objective
  double prior_center_bpm = 120.0;
  double prior_width_octaves = 1.4;
  double min_bpm = 40.0;
  double max_bpm = 240.0;
  double noise_floor = 0.1;  // minimum normalized autocorrelation peak
};

struct AlignmentOptions {
  double min_correlation = 0.3;
  double min_overlap_ms = 5000.0;
};

// Linear-interpolation resampler used to bring audio to 22050 Hz.
std::vector<float> resample_linear(std::span<const float> audio,
                                   double from_rate, double to_rate);

// Log-compressed, half-wave rectified spectral flux (2048/512 STFT at
// 22050 Hz). Sample i is stamped at the leading half-power point of analysis
// frame i, which is where a transient produces its flux peak.
OnsetEnvelope onset_envelope(std::span<const float> audio, double sample_rate);

// Global tempo from the prior-weighted autocorrelation, in BPM.
double estimate_tempo(const OnsetEnvelope& env,
                      const BeatTrackerOptions& opts = {});

// Tempo estimate followed by dynamic-programming beat placement.
BeatGrid estimate_beats(const OnsetEnvelope& env,
                        const BeatTrackerOptions& opts = {});

// Constant-tempo grid anchored at t = 0 covering [0, until_ms].
BeatGrid constant_beat_grid(double bpm, double until_ms);

// Beat file: one time in milliseconds per line, optional `bpm=<value>` header.
BeatGrid parse_beat_file(std::string_view text);
std::string format_beat_file(const BeatGrid& grid);

// 8-beat segments starting at the first beat at or after the recording start.
std::vector<Segment> build_segments(const BeatGrid& grid, const Recording& r);

// Segments on an arbitrary frame clock (frame i at times_ms[i]).
std::vector<Segment> build_segments(const BeatGrid& grid,
                                    std::span<const std::int64_t> frame_times_ms,
                                    double fps);

inline constexpr std::size_t kBeatsPerSegment = 8;

// Lag (ms) of env_b relative to env_a maximizing normalized cross-correlation;
// positive when b starts later than a.
double align_recordings(const OnsetEnvelope& env_a, const OnsetEnvelope& env_b,
                        const AlignmentOptions& opts = {});

struct AudioAlignment {
  double offset_ms = 0.0;
  double peak_correlation = 0.0;
};
AudioAlignment align_recordings_detailed(const OnsetEnvelope& env_a,
                                         const OnsetEnvelope& env_b,
                                         const AlignmentOptions& opts = {});

// PCM WAVE reading (16-bit integer or 32-bit float, stereo averaged to mono).
struct AudioClip {
  double sample_rate = 0.0;
  std::vector<float> samples;
};
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_wav16(const AudioClip& clip);

}  // namespace syncup
