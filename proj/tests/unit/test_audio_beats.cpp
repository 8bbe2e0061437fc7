#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "syncup/audio_beats.hpp"
#include "syncup/error.hpp"
#include "syncup/eval_harness.hpp"

using namespace syncup;
using namespace testing_helpers;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kInvalidArgument;
}

double nearest_distance(double t, const std::vector<double>& xs) {
  double best = 1e300;
  for (double x : xs) best = std::min(best, std::abs(x - t));
  return best;
}

}  // namespace

TEST(OnsetEnvelope, SilenceIsZero) {
  const std::vector<float> silence(22050 * 3, 0.0f);
  const auto env = onset_envelope(silence, 22050);
  EXPECT_NEAR(env.hop_ms, 512.0 / 22050.0 * 1000.0, 1e-9);
  for (double v : env.values) EXPECT_EQ(v, 0.0);
}

TEST(OnsetEnvelope, ClickPeaksAtItsTime) {
  for (double sr : {22050.0, 44100.0, 16000.0}) {
    BeatGrid grid;
    grid.beat_times_ms = {1000.0};
    const AudioClip clip = click_track(grid, 3000, sr);
    const auto env = onset_envelope(clip.samples, sr);
    const auto peak = std::max_element(env.values.begin(), env.values.end()) - env.values.begin();
    EXPECT_NEAR(env.time_ms(static_cast<std::size_t>(peak)), 1000.0, env.hop_ms + 1e-9)
        << "sample rate " << sr;
  }
}

TEST(OnsetEnvelope, SteadyToneSettles) {
  std::vector<float> tone(22050 * 4);
  for (std::size_t i = 0; i < tone.size(); ++i) {
    tone[i] = static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * 440.0 * i / 22050.0));
  }
  const auto env = onset_envelope(tone, 22050);
  const double peak = *std::max_element(env.values.begin(), env.values.end());
  ASSERT_GT(peak, 0.0);
  for (std::size_t i = 10; i + 10 < env.values.size(); ++i) EXPECT_LT(env.values[i], 0.01 * peak);
}

TEST(OnsetEnvelope, RejectsShortOrLowRateAudio) {
  const std::vector<float> short_clip(1000, 0.0f);
  EXPECT_EQ(code_of([&] { onset_envelope(short_clip, 22050); }), ErrorCode::kAudioTooShort);
  const std::vector<float> clip(8000, 0.0f);
  EXPECT_EQ(code_of([&] { onset_envelope(clip, 4000); }), ErrorCode::kInvalidArgument);
}

class ClickTrackTempo : public ::testing::TestWithParam<double> {};

TEST_P(ClickTrackTempo, RecoversBpmAndBeats) {
  const double bpm = GetParam();
  const BeatGrid truth = constant_beat_grid(bpm, 60000);
  const AudioClip clip = click_track(truth, 60000);
  const BeatGrid est = estimate_beats(onset_envelope(clip.samples, clip.sample_rate));
  EXPECT_NEAR(est.bpm, bpm, 2.0);
  ASSERT_GT(est.beat_times_ms.size(), 10u);
  std::size_t within = 0;
  for (double b : est.beat_times_ms) within += nearest_distance(b, truth.beat_times_ms) <= 30.0;
  EXPECT_EQ(within, est.beat_times_ms.size());
  EXPECT_TRUE(std::is_sorted(est.beat_times_ms.begin(), est.beat_times_ms.end()));
}

INSTANTIATE_TEST_SUITE_P(Tempi, ClickTrackTempo, ::testing::Values(90.0, 120.0, 150.0));

TEST(EstimateBeats, SilenceHasNoTempo) {
  OnsetEnvelope env{512.0 / 22.05, std::vector<double>(600, 0.0)};
  EXPECT_EQ(code_of([&] { estimate_beats(env); }), ErrorCode::kNoTempoFound);
}

TEST(EstimateBeats, ShortEnvelopeRejected) {
  OnsetEnvelope env{512.0 / 22.05, std::vector<double>(50, 1.0)};
  EXPECT_EQ(code_of([&] { estimate_beats(env); }), ErrorCode::kEnvelopeTooShort);
}

TEST(EstimateBeats, AmplitudeScaleInvariant) {
  const AudioClip clip = click_track(constant_beat_grid(120, 20000), 20000);
  OnsetEnvelope env = onset_envelope(clip.samples, clip.sample_rate);
  const BeatGrid a = estimate_beats(env);
  for (double& v : env.values) v *= 7.5;
  const BeatGrid b = estimate_beats(env);
  EXPECT_EQ(a.beat_times_ms, b.beat_times_ms);
  EXPECT_DOUBLE_EQ(a.bpm, b.bpm);
}

TEST(BeatFile, ParseAndFormat) {
  const BeatGrid g = parse_beat_file("bpm=120\n# comment\n0\n500\n1000.5\n\n");
  EXPECT_DOUBLE_EQ(g.bpm, 120.0);
  ASSERT_EQ(g.beat_times_ms.size(), 3u);
  EXPECT_DOUBLE_EQ(g.beat_times_ms[2], 1000.5);
  const BeatGrid back = parse_beat_file(format_beat_file(g));
  EXPECT_EQ(back.beat_times_ms, g.beat_times_ms);
  EXPECT_DOUBLE_EQ(back.bpm, g.bpm);
  EXPECT_EQ(code_of([] { parse_beat_file("0\n500\n400\n"); }), ErrorCode::kNonMonotonicTime);
  EXPECT_EQ(code_of([] { parse_beat_file("zero\n"); }), ErrorCode::kMalformedRecord);
}

TEST(Segments, TwentySecondsAt120Bpm) {
  const BeatGrid grid = constant_beat_grid(120, 20000);
  std::vector<std::vector<Skeleton>> frames(600);
  const Recording r = recording_of(frames, 30);
  const auto segs = build_segments(grid, r);
  ASSERT_EQ(segs.size(), 5u);
  for (std::size_t s = 0; s < segs.size(); ++s) {
    EXPECT_EQ(segs[s].index, s);
    EXPECT_DOUBLE_EQ(segs[s].start_ms, 4000.0 * s);
    EXPECT_DOUBLE_EQ(segs[s].end_ms, 4000.0 * (s + 1));
    EXPECT_EQ(segs[s].first_frame, 120 * s);
    EXPECT_EQ(segs[s].frame_count(), 120u);
  }
}

TEST(Segments, ThirtyThreeBeatsGiveFour) {
  BeatGrid grid;
  for (int b = 0; b < 33; ++b) grid.beat_times_ms.push_back(100.0 + 600.0 * b);
  const Recording r = recording_of(std::vector<std::vector<Skeleton>>(900), 30);
  const auto segs = build_segments(grid, r);
  ASSERT_EQ(segs.size(), 4u);
  EXPECT_DOUBLE_EQ(segs.front().start_ms, 100.0);
  EXPECT_DOUBLE_EQ(segs.back().end_ms, 100.0 + 600.0 * 32);
}

TEST(Segments, TileWithoutOverlap) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> gap(350, 700);
  BeatGrid grid;
  double t = 120;
  while (t < 40000) {
    grid.beat_times_ms.push_back(t);
    t += gap(rng);
  }
  const Recording r = recording_of(std::vector<std::vector<Skeleton>>(1230), 30);
  const auto segs = build_segments(grid, r);
  double total = 0.0;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    total += segs[s].end_ms - segs[s].start_ms;
    if (s) {
      EXPECT_DOUBLE_EQ(segs[s].start_ms, segs[s - 1].end_ms);
      EXPECT_EQ(segs[s].first_frame, segs[s - 1].last_frame + 1);
    }
  }
  EXPECT_DOUBLE_EQ(total, segs.back().end_ms - segs.front().start_ms);
}

TEST(Segments, GridBeforeRecordingIsTooFewBeats) {
  BeatGrid grid = constant_beat_grid(120, 10000);
  Recording r = recording_of(std::vector<std::vector<Skeleton>>(300), 30);
  for (auto& f : r.frames) f.time_ms += 60000;
  EXPECT_EQ(code_of([&] { build_segments(grid, r); }), ErrorCode::kTooFewBeats);
}

TEST(AlignRecordings, ConstructedShiftAndAntisymmetry) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> gap(1.0 / 400.0);
  BeatGrid grid;
  for (double t = 100; t < 30000; t += 150 + gap(rng)) grid.beat_times_ms.push_back(t);
  const AudioClip a = click_track(grid, 30000, 22050, 0.0);
  const AudioClip b = click_track(grid, 30000, 22050, 500.0);
  const auto ea = onset_envelope(a.samples, 22050), eb = onset_envelope(b.samples, 22050);
  const double ab = align_recordings(ea, eb), ba = align_recordings(eb, ea);
  EXPECT_NEAR(ab, 500.0, ea.hop_ms);
  EXPECT_NEAR(ab, -ba, ea.hop_ms);
  EXPECT_DOUBLE_EQ(align_recordings(ea, ea), 0.0);
}

TEST(AlignRecordings, UncorrelatedNoiseIsLowCorrelation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t errors = 0;
  for (int n = 0; n < 10; ++n) {
    OnsetEnvelope a{23.2, {}}, b{23.2, {}};
    for (int i = 0; i < 1000; ++i) {
      a.values.push_back(u(rng));
      b.values.push_back(u(rng));
    }
    try {
      align_recordings(a, b);
    } catch (const Error& e) {
      errors += e.code() == ErrorCode::kLowCorrelation;
    }
  }
  EXPECT_EQ(errors, 10u);
}

TEST(Wav, EncodeDecodeRoundTrip) {
  AudioClip clip;
  clip.sample_rate = 16000;
  for (int i = 0; i < 1600; ++i) clip.samples.push_back(static_cast<float>(std::sin(i * 0.01)));
  const auto bytes = encode_wav16(clip);
  const AudioClip back = decode_wav(bytes);
  EXPECT_DOUBLE_EQ(back.sample_rate, 16000.0);
  ASSERT_EQ(back.samples.size(), clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i) EXPECT_NEAR(back.samples[i], clip.samples[i], 1e-4);
  std::vector<std::uint8_t> junk(40, 0);
  EXPECT_EQ(code_of([&] { decode_wav(junk); }), ErrorCode::kMalformedRecord);
}

TEST(Resample, PreservesDuration) {
  std::vector<float> x(44100, 1.0f);
  const auto y = resample_linear(x, 44100, 22050);
  EXPECT_NEAR(static_cast<double>(y.size()), 22050.0, 1.0);
  for (float v : y) EXPECT_FLOAT_EQ(v, 1.0f);
}
