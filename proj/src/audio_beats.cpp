#include "syncup/audio_beats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fftw3.h>

#include "syncup/error.hpp"

namespace syncup {

namespace {

constexpr double kMinEnvelopeMs = 5000.0;

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(
            fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  // Magnitudes of bins 0..n/2.
  void magnitudes(std::vector<double>& mags) {
    fftw_execute(plan_);
    mags.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < mags.size(); ++k) {
      mags[k] = std::hypot(out_[k][0], out_[k][1]);
    }
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(std::span<const double> v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return v.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(v.size()));
}

void require_envelope_length(const OnsetEnvelope& env) {
  if (!(env.hop_ms > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "envelope hop must be positive");
  }
  if (env.duration_ms() < kMinEnvelopeMs) {
    throw Error(ErrorCode::kEnvelopeTooShort,
                "envelope spans " + std::to_string(env.duration_ms()) +
                    " ms, need at least 5000 ms");
  }
}

double linear_at(std::span<const double> v, double pos) {
  if (pos < 0.0) return 0.0;
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return i < v.size() ? v[i] : 0.0;
  const double frac = pos - static_cast<double>(i);
  return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

// Envelope scaled to unit standard deviation; throws when flat.
std::vector<double> unit_normalized(const OnsetEnvelope& env) {
  const double sd = stddev_of(env.values);
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::kNoTempoFound, "onset envelope carries no energy");
  }
  std::vector<double> out(env.values.size());
  std::transform(env.values.begin(), env.values.end(), out.begin(),
                 [sd](double x) { return x / sd; });
  return out;
}

// Tempo period in envelope samples (fractional).
double tempo_period(const OnsetEnvelope& env, const BeatTrackerOptions& opts) {
  require_envelope_length(env);
  const std::vector<double> x = unit_normalized(env);
  const double mu = mean_of(x);
  std::vector<double> centered(x.size());
  std::transform(x.begin(), x.end(), centered.begin(),
                 [mu](double v) { return v - mu; });

  const double min_lag_f = 60000.0 / opts.max_bpm / env.hop_ms;
  const double max_lag_f = 60000.0 / opts.min_bpm / env.hop_ms;
  // Enough lag range for the comb refinement over several periods.
  const std::size_t acf_len = std::min(
      centered.size() - 1,
      static_cast<std::size_t>(std::ceil(std::max(4.0 * max_lag_f, 4000.0 / env.hop_ms))) + 2);

  std::vector<double> acf(acf_len + 1, 0.0);
  for (std::size_t lag = 0; lag <= acf_len; ++lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < centered.size(); ++t) {
      s += centered[t] * centered[t + lag];
    }
    acf[lag] = s;
  }
  if (!(acf[0] > 0.0)) {
    throw Error(ErrorCode::kNoTempoFound, "flat onset envelope");
  }
  for (double& a : acf) a /= acf[0];

  const double prior_center =
      60000.0 / opts.prior_center_bpm / env.hop_ms;  // in samples
  const auto lo = static_cast<std::size_t>(std::ceil(min_lag_f));
  const auto hi = std::min(acf_len, static_cast<std::size_t>(std::floor(max_lag_f)));
  std::size_t best_lag = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t lag = lo; lag <= hi; ++lag) {
    const double octaves = std::log2(static_cast<double>(lag) / prior_center);
    const double w = std::exp(-0.5 * std::pow(octaves / opts.prior_width_octaves, 2));
    const double score = w * acf[lag];
    if (score > best_score) {
      best_score = score;
      best_lag = lag;
    }
  }
  if (best_lag == 0 || acf[best_lag] < opts.noise_floor) {
    throw Error(ErrorCode::kNoTempoFound,
                "autocorrelation peak below the noise floor");
  }

  // Comb refinement: the period whose multiples collect the most
  // autocorrelation, searched on a 0.01-sample grid around the coarse peak.
  double best_period = static_cast<double>(best_lag);
  double best_comb = -std::numeric_limits<double>::infinity();
  for (double p = static_cast<double>(best_lag) - 1.0;
       p <= static_cast<double>(best_lag) + 1.0 + 1e-9; p += 0.01) {
    if (p < min_lag_f * 0.9) continue;
    double comb = 0.0;
    int terms = 0;
    for (int m = 1; m * p <= static_cast<double>(acf_len) - 1.0; ++m) {
      comb += linear_at(acf, m * p);
      ++terms;
    }
    if (terms == 0) continue;
    comb /= terms;
    if (comb > best_comb) {
      best_comb = comb;
      best_period = p;
    }
  }
  return best_period;
}

std::vector<double> gaussian_smooth(std::span<const double> x, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * (k / sigma) * (k / sigma));
  }
  std::vector<double> out(x.size(), 0.0);
  const auto n = static_cast<long>(x.size());
  for (long i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      const long j = i + k;
      if (j >= 0 && j < n) s += kernel[k + radius] * x[j];
    }
    out[i] = s;
  }
  return out;
}

}  // namespace

std::vector<float> resample_linear(std::span<const float> audio,
                                   double from_rate, double to_rate) {
  if (from_rate == to_rate) return {audio.begin(), audio.end()};
  if (audio.empty()) return {};
  const double ratio = from_rate / to_rate;
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(audio.size() - 1) / ratio)) + 1;
  std::vector<float> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    const float a = audio[k];
    const float b = k + 1 < audio.size() ? audio[k + 1] : audio[k];
    out[i] = static_cast<float>(a + (b - a) * frac);
  }
  return out;
}

OnsetEnvelope onset_envelope(std::span<const float> audio, double sample_rate) {
  if (sample_rate < 8000.0) {
    throw Error(ErrorCode::kInvalidArgument, "sample rate below 8000 Hz");
  }
  if (static_cast<double>(audio.size()) < sample_rate) {
    throw Error(ErrorCode::kAudioTooShort, "need at least one second of audio");
  }
  const std::vector<float> x = resample_linear(audio, sample_rate, kAnalysisSampleRate);

  const std::size_t n = kOnsetWindow;
  const std::size_t hop = kOnsetHop;
  const std::size_t frames = 1 + x.size() / hop;
  std::vector<double> window(n);
  for (std::size_t i = 0; i < n; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }

  RealFft fft(n);
  std::vector<double> mags, prev_log, cur_log;
  std::vector<double> flux(frames, 0.0);
  const auto half = static_cast<long>(n / 2);
  for (std::size_t f = 0; f < frames; ++f) {
    // Frame f is centred on sample f * hop (zero padded at the edges).
    const long start = static_cast<long>(f * hop) - half;
    double* in = fft.input();
    for (std::size_t i = 0; i < n; ++i) {
      const long j = start + static_cast<long>(i);
      const double s = (j >= 0 && j < static_cast<long>(x.size())) ? x[j] : 0.0;
      in[i] = s * window[i];
    }
    fft.magnitudes(mags);
    cur_log.resize(mags.size());
    std::transform(mags.begin(), mags.end(), cur_log.begin(),
                   [](double m) { return std::log1p(m); });
    if (f > 0) {
      double s = 0.0;
      for (std::size_t k = 0; k < cur_log.size(); ++k) {
        s += std::max(0.0, cur_log[k] - prev_log[k]);
      }
      flux[f] = s;
    }
    std::swap(prev_log, cur_log);
  }

  // A transient reaches its flux peak one hop (a quarter window) before the
  // frame centred on it, so flux[f] is stamped at the centre of frame f + 1.
  OnsetEnvelope env;
  env.hop_ms = 1000.0 * static_cast<double>(hop) / kAnalysisSampleRate;
  env.values.assign(frames, 0.0);
  for (std::size_t f = 0; f + 1 < frames; ++f) env.values[f + 1] = flux[f];
  return env;
}

double estimate_tempo(const OnsetEnvelope& env, const BeatTrackerOptions& opts) {
  return 60000.0 / (tempo_period(env, opts) * env.hop_ms);
}

BeatGrid estimate_beats(const OnsetEnvelope& env, const BeatTrackerOptions& opts) {
  const double period = tempo_period(env, opts);
  const std::vector<double> x = unit_normalized(env);
  const std::vector<double> local = gaussian_smooth(x, period / 32.0);

  const std::size_t n = local.size();
  std::vector<double> cumscore(n, 0.0);
  std::vector<long> backlink(n, -1);
  const auto max_back = static_cast<long>(std::lround(2.0 * period));
  const auto min_back = std::max(1L, static_cast<long>(std::lround(period / 2.0)));
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    long arg = -1;
    for (long back = min_back; back <= max_back; ++back) {
      const long tau = static_cast<long>(i) - back;
      if (tau < 0) break;
      const double deviation = std::log(static_cast<double>(back) / period);
      const double score =
          cumscore[tau] - opts.transition_tightness * deviation * deviation;
      if (score > best) {
        best = score;
        arg = tau;
      }
    }
    cumscore[i] = local[i] + (arg >= 0 ? best : 0.0);
    backlink[i] = arg;
  }

  // End on the last local maximum of the cumulative score exceeding half the
  // median local-maximum value.
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (cumscore[i] > cumscore[i - 1] && cumscore[i] >= cumscore[i + 1]) {
      maxima.push_back(i);
    }
  }
  if (maxima.empty()) {
    throw Error(ErrorCode::kNoTempoFound, "no beat candidates");
  }
  std::vector<double> peak_values;
  for (auto i : maxima) peak_values.push_back(cumscore[i]);
  std::nth_element(peak_values.begin(),
                   peak_values.begin() + peak_values.size() / 2, peak_values.end());
  const double median = peak_values[peak_values.size() / 2];
  std::size_t end = maxima.back();
  for (auto it = maxima.rbegin(); it != maxima.rend(); ++it) {
    if (cumscore[*it] > 0.5 * median) {
      end = *it;
      break;
    }
  }

  std::vector<std::size_t> frames;
  for (long b = static_cast<long>(end); b >= 0; b = backlink[b]) {
    frames.push_back(static_cast<std::size_t>(b));
  }
  std::reverse(frames.begin(), frames.end());

  BeatGrid grid;
  grid.bpm = 60000.0 / (period * env.hop_ms);
  for (auto f : frames) {
    double pos = static_cast<double>(f);
    if (f > 0 && f + 1 < n) {
      const double a = local[f - 1], b = local[f], c = local[f + 1];
      const double denom = a - 2.0 * b + c;
      if (b >= a && b >= c && denom < 0.0) {
        pos += std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
      }
    }
    const double t = pos * env.hop_ms;
    if (grid.beat_times_ms.empty() || t > grid.beat_times_ms.back()) {
      grid.beat_times_ms.push_back(t);
    }
  }
  return grid;
}

BeatGrid constant_beat_grid(double bpm, double until_ms) {
  if (!(bpm > 0.0) || !std::isfinite(bpm)) {
    throw Error(ErrorCode::kInvalidArgument, "bpm must be positive");
  }
  BeatGrid grid;
  grid.bpm = bpm;
  const double ibi = 60000.0 / bpm;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * ibi;
    if (t > until_ms + 1e-9) break;
    grid.beat_times_ms.push_back(t);
  }
  return grid;
}

BeatGrid parse_beat_file(std::string_view text) {
  BeatGrid grid;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
      line.pop_back();
    }
    try {
      if (line.rfind("bpm=", 0) == 0) {
        grid.bpm = std::stod(line.substr(4));
        continue;
      }
      std::size_t used = 0;
      const double t = std::stod(line, &used);
      if (used != line.size() || !std::isfinite(t)) throw std::invalid_argument("");
      if (!grid.beat_times_ms.empty() && t <= grid.beat_times_ms.back()) {
        throw Error(ErrorCode::kNonMonotonicTime,
                    "beat file line " + std::to_string(line_no) +
                        " is not after the previous beat");
      }
      grid.beat_times_ms.push_back(t);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kMalformedRecord,
                  "beat file line " + std::to_string(line_no) + ": '" + line + "'");
    }
  }
  if (grid.bpm <= 0.0 && grid.beat_times_ms.size() >= 2) {
    std::vector<double> ibis;
    for (std::size_t i = 1; i < grid.beat_times_ms.size(); ++i) {
      ibis.push_back(grid.beat_times_ms[i] - grid.beat_times_ms[i - 1]);
    }
    std::nth_element(ibis.begin(), ibis.begin() + ibis.size() / 2, ibis.end());
    grid.bpm = 60000.0 / ibis[ibis.size() / 2];
  }
  return grid;
}

std::string format_beat_file(const BeatGrid& grid) {
  std::ostringstream out;
  out.precision(17);
  if (grid.bpm > 0.0) out << "bpm=" << grid.bpm << '\n';
  for (double t : grid.beat_times_ms) out << t << '\n';
  return out.str();
}

std::vector<Segment> build_segments(const BeatGrid& grid, const Recording& r) {
  std::vector<std::int64_t> times;
  times.reserve(r.frames.size());
  for (const auto& f : r.frames) times.push_back(f.time_ms);
  return build_segments(grid, times, r.fps);
}

std::vector<Segment> build_segments(const BeatGrid& grid,
                                    std::span<const std::int64_t> frame_times_ms,
                                    double fps) {
  if (frame_times_ms.empty()) {
    throw Error(ErrorCode::kEmptyRecording, "no frames to segment");
  }
  const double frame_ms = 1000.0 / fps;
  // time_ms values are rounded to whole milliseconds.
  constexpr double kStampTolerance = 1.0;
  const double start = static_cast<double>(frame_times_ms.front());
  const double end = static_cast<double>(frame_times_ms.back()) + frame_ms;

  std::vector<double> usable;
  for (double b : grid.beat_times_ms) {
    if (b >= start - kStampTolerance && b <= end + 0.5 * frame_ms) usable.push_back(b);
  }
  if (usable.size() < kBeatsPerSegment + 1) {
    throw Error(ErrorCode::kTooFewBeats,
                std::to_string(usable.size()) +
                    " beats overlap the recording, need at least 9");
  }

  const std::size_t count = (usable.size() - 1) / kBeatsPerSegment;
  std::vector<Segment> segments;
  segments.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Segment seg;
    seg.index = s;
    seg.start_ms = usable[s * kBeatsPerSegment];
    seg.end_ms = usable[(s + 1) * kBeatsPerSegment];
    const double lo = seg.start_ms - kStampTolerance / 2.0;
    const double hi = seg.end_ms - kStampTolerance / 2.0;
    const auto first = std::lower_bound(
        frame_times_ms.begin(), frame_times_ms.end(), lo,
        [](std::int64_t t, double v) { return static_cast<double>(t) < v; });
    const auto past = std::lower_bound(
        frame_times_ms.begin(), frame_times_ms.end(), hi,
        [](std::int64_t t, double v) { return static_cast<double>(t) < v; });
    if (first == past) {
      throw Error(ErrorCode::kTooFewBeats,
                  "segment " + std::to_string(s) + " contains no frames");
    }
    seg.first_frame = static_cast<std::size_t>(first - frame_times_ms.begin());
    seg.last_frame = static_cast<std::size_t>(past - frame_times_ms.begin()) - 1;
    segments.push_back(seg);
  }
  return segments;
}

AudioAlignment align_recordings_detailed(const OnsetEnvelope& env_a,
                                         const OnsetEnvelope& env_b,
                                         const AlignmentOptions& opts) {
  require_envelope_length(env_a);
  require_envelope_length(env_b);
  if (std::abs(env_a.hop_ms - env_b.hop_ms) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "envelopes use different hops");
  }
  const auto& a = env_a.values;
  const auto& b = env_b.values;
  const auto na = static_cast<long>(a.size());
  const auto nb = static_cast<long>(b.size());
  const long shorter = std::min(na, nb);
  const long min_overlap = std::max(
      static_cast<long>(std::ceil(opts.min_overlap_ms / env_a.hop_ms)), shorter / 2);

  // b[t + k] ~ a[t]; overlap for lag k is t in [max(0, -k), min(na, nb - k)).
  double best_corr = -std::numeric_limits<double>::infinity();
  long best_lag = 0;
  for (long k = -(na - min_overlap); k <= nb - min_overlap; ++k) {
    const long t0 = std::max(0L, -k);
    const long t1 = std::min(na, nb - k);
    const long len = t1 - t0;
    if (len < min_overlap) continue;
    double sa = 0.0, sb = 0.0;
    for (long t = t0; t < t1; ++t) {
      sa += a[t];
      sb += b[t + k];
    }
    const double ma = sa / len, mb = sb / len;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (long t = t0; t < t1; ++t) {
      const double da = a[t] - ma, db = b[t + k] - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
    const double corr = (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
    if (corr > best_corr ||
        (corr == best_corr && std::abs(k) < std::abs(best_lag))) {
      best_corr = corr;
      best_lag = k;
    }
  }
  if (!(best_corr >= opts.min_correlation)) {
    throw Error(ErrorCode::kLowCorrelation,
                "peak envelope correlation " + std::to_string(best_corr) +
                    " below " + std::to_string(opts.min_correlation));
  }
  return {static_cast<double>(best_lag) * env_a.hop_ms, best_corr};
}

double align_recordings(const OnsetEnvelope& env_a, const OnsetEnvelope& env_b,
                        const AlignmentOptions& opts) {
  return align_recordings_detailed(env_a, env_b, opts).offset_ms;
}

}  // namespace syncup
