#include "syncup/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "syncup/error.hpp"
#include "syncup/metrics.hpp"
#include "syncup/temporal_alignment.hpp"

namespace syncup {

namespace {

constexpr double kPi = std::numbers::pi;

struct PartGeometry {
  double base_angle;  // image coordinates, y down
  double length;      // multiples of the torso length
  double amplitude;   // motion range in radians
};

// Indexed like body_parts().
constexpr std::array<PartGeometry, kNumParts> kGeometry = {{
    {-kPi / 2, 0.30, 0.25},        // head
    {kPi, 0.35, 0.15},             // r_shoulder
    {kPi / 2 + 0.3, 0.50, 1.10},   // r_upper_arm
    {kPi / 2 + 0.1, 0.45, 1.20},   // r_forearm
    {0.0, 0.35, 0.15},             // l_shoulder
    {kPi / 2 - 0.3, 0.50, 1.10},   // l_upper_arm
    {kPi / 2 - 0.1, 0.45, 1.20},   // l_forearm
    {kPi / 2 + 0.15, 1.00, 0.12},  // r_torso
    {kPi / 2, 0.75, 0.45},         // r_thigh
    {kPi / 2, 0.70, 0.45},         // r_shin
    {kPi / 2 - 0.15, 1.00, 0.12},  // l_torso
    {kPi / 2, 0.75, 0.45},         // l_thigh
    {kPi / 2, 0.70, 0.45},         // l_shin
}};

constexpr double kTorsoPx = 90.0;
constexpr double kSpacingPx = 260.0;
constexpr double kTransitionMs = 260.0;
constexpr double kMarginMs = 3000.0;
constexpr double kDropoutJitterPx = 15.0;

// Angle offsets of every part as a function of choreography time.
class Choreography {
 public:
  Choreography(MotionModel model, double duration_ms, std::mt19937_64& rng) : model_(model) {
    if (model == MotionModel::kPeriodicLimbSwing) {
      // Incommensurate periods so no lag below a few seconds repeats the pattern.
      constexpr std::array<double, 4> periods = {1130.0, 1710.0, 2390.0, 3070.0};
      std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
      std::uniform_real_distribution<double> weight(0.3, 1.0);
      for (std::size_t i = 0; i < kNumParts; ++i) {
        for (std::size_t h = 0; h < periods.size(); ++h) {
          swing_[i][h] = {periods[(i + h) % periods.size()], phase(rng), weight(rng)};
        }
      }
      return;
    }
    std::exponential_distribution<double> gap(1.0 / 300.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::bernoulli_distribution moves(0.5);
    std::array<double, kNumParts> current{};
    double t = -kMarginMs;
    while (t < duration_ms + kMarginMs) {
      Step step{t, current, current};
      bool any = false;
      for (std::size_t i = 0; i < kNumParts; ++i) {
        if (moves(rng)) {
          step.to[i] = kGeometry[i].amplitude * unit(rng);
          any = true;
        }
      }
      if (!any) step.to[2] = kGeometry[2].amplitude * unit(rng);
      current = step.to;
      steps_.push_back(step);
      t += kTransitionMs + 40.0 + gap(rng);
    }
  }

  double offset(std::size_t part, double t_ms) const {
    if (model_ == MotionModel::kPeriodicLimbSwing) {
      double v = 0.0, norm = 0.0;
      for (const auto& h : swing_[part]) {
        v += h.weight * std::sin(2 * kPi * t_ms / h.period + h.phase);
        norm += h.weight;
      }
      return kGeometry[part].amplitude * v / norm;
    }
    const auto it = std::upper_bound(steps_.begin(), steps_.end(), t_ms,
                                     [](double v, const Step& s) { return v < s.start; });
    if (it == steps_.begin()) return 0.0;
    const Step& s = *std::prev(it);
    const double u = std::clamp((t_ms - s.start) / kTransitionMs, 0.0, 1.0);
    const double ease = 0.5 - 0.5 * std::cos(kPi * u);
    return s.from[part] + ease * (s.to[part] - s.from[part]);
  }

 private:
  struct Harmonic {
    double period, phase, weight;
  };
  struct Step {
    double start;
    std::array<double, kNumParts> from, to;
  };

  MotionModel model_;
  std::array<std::array<Harmonic, 4>, kNumParts> swing_{};
  std::vector<Step> steps_;
};

Skeleton pose(const std::array<double, kNumParts>& angles, double root_x, double root_y,
              double scale) {
  Skeleton s;
  const auto& parts = body_parts();
  s[Joint::kNeck] = {root_x, root_y, 1.0};
  for (std::size_t i = 0; i < kNumParts; ++i) {
    const Keypoint& from = s[parts[i].from];
    const double len = kGeometry[i].length * kTorsoPx * scale;
    s[parts[i].to] = {from.x + len * std::cos(angles[i]), from.y + len * std::sin(angles[i]),
                      1.0};
  }
  const Keypoint nose = s[Joint::kNose];
  const double r = 0.08 * kTorsoPx * scale;
  s[Joint::kREye] = {nose.x - r, nose.y - 0.5 * r, 1.0};
  s[Joint::kLEye] = {nose.x + r, nose.y - 0.5 * r, 1.0};
  s[Joint::kREar] = {nose.x - 2.2 * r, nose.y, 1.0};
  s[Joint::kLEar] = {nose.x + 2.2 * r, nose.y, 1.0};
  return s;
}

std::vector<double> split_list(const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item.substr(first), &used);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad number '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  std::string out(s.substr(a, b - a + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

}  // namespace

std::string_view to_string(MotionModel m) {
  return m == MotionModel::kPeriodicLimbSwing ? "periodic-limb-swing" : "step-sequence";
}

MotionModel motion_model_from_string(std::string_view s) {
  if (s == "periodic-limb-swing" || s == "periodic") return MotionModel::kPeriodicLimbSwing;
  if (s == "step-sequence" || s == "step") return MotionModel::kStepSequence;
  throw Error(ErrorCode::kInvalidArgument, "unknown motion model '" + std::string(s) + "'");
}

const Perturbation& SyntheticSpec::perturbation(std::size_t dancer) const {
  static const Perturbation clean;
  return dancer < perturbations.size() ? perturbations[dancer] : clean;
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (dancer_count == 0) fail("dancer_count must be positive");
  if (!(fps > 0.0) || !(duration_ms > 0.0) || !(bpm > 0.0)) {
    fail("fps, duration_ms and bpm must be positive");
  }
  if (perturbations.size() > dancer_count) fail("more perturbations than dancers");
  for (const auto& p : perturbations) {
    if (std::abs(p.time_shift_ms) > 2000.0) fail("time shifts must lie within +-2 s");
    if (p.angular_noise_sd < 0.0) fail("angular noise must be non-negative");
    if (p.dropout_prob < 0.0 || p.dropout_prob >= 1.0) fail("dropout must lie in [0, 1)");
  }
  if (crossing && dancer_count < 2) fail("crossing needs two dancers");
}

SyntheticSpec parse_synthetic_spec(std::string_view text) {
  SyntheticSpec spec;
  std::vector<double> shifts, noise, dropout;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty() || trim(line).front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    auto scalar = [&] {
      const auto v = split_list(value);
      if (v.size() != 1) throw Error(ErrorCode::kInvalidArgument, key + " takes one number");
      return v.front();
    };
    if (key == "dancers" || key == "dancer_count") {
      spec.dancer_count = static_cast<std::size_t>(scalar());
    } else if (key == "fps") {
      spec.fps = scalar();
    } else if (key == "duration_ms") {
      spec.duration_ms = scalar();
    } else if (key == "bpm") {
      spec.bpm = scalar();
    } else if (key == "motion" || key == "motion_model") {
      spec.motion = motion_model_from_string(value);
    } else if (key == "shifts_ms" || key == "time_shift_ms") {
      shifts = split_list(value);
    } else if (key == "angular_noise_sd") {
      noise = split_list(value);
    } else if (key == "dropout" || key == "dropout_prob") {
      dropout = split_list(value);
    } else if (key == "crossing") {
      spec.crossing = value == "true" || value == "1";
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown key '" + key + "'");
    }
  }
  const std::size_t n = std::max({shifts.size(), noise.size(), dropout.size()});
  spec.perturbations.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j < shifts.size()) spec.perturbations[j].time_shift_ms = shifts[j];
    if (j < noise.size()) spec.perturbations[j].angular_noise_sd = noise[j];
    if (j < dropout.size()) spec.perturbations[j].dropout_prob = dropout[j];
  }
  spec.validate();
  return spec;
}

SyntheticSession generate(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const Choreography choreo(spec.motion, spec.duration_ms, rng);

  const auto frame_count =
      static_cast<std::size_t>(std::floor(spec.duration_ms * spec.fps / 1000.0));
  const std::size_t J = spec.dancer_count;

  SyntheticSession out;
  GroundTruth& truth = out.truth;
  truth.time_shift_ms.resize(J);
  truth.angular_deviation.assign(J, std::vector<std::array<double, kNumParts>>(frame_count));
  truth.dropped.assign(J, std::vector<std::size_t>(frame_count, 0));
  truth.beats = constant_beat_grid(spec.bpm, spec.duration_ms);

  std::vector<double> scale(J);
  std::uniform_real_distribution<double> scale_dist(0.9, 1.1);
  for (auto& s : scale) s = scale_dist(rng);

  std::vector<std::mt19937_64> dancer_rng;
  for (std::size_t j = 0; j < J; ++j) dancer_rng.emplace_back(seed * 0x100000001b3ULL + j + 1);

  out.group.id = "synthetic-" + std::to_string(seed);
  out.group.fps = spec.fps;
  out.group.role = Role::kGroup;
  out.individual.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    out.individual[j].id = out.group.id + "-dancer" + std::to_string(j);
    out.individual[j].fps = spec.fps;
    out.individual[j].role = j == 0 ? Role::kLeader : Role::kFollower;
  }

  std::uniform_real_distribution<double> conf(0.7, 1.0);
  std::uniform_real_distribution<double> low(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (std::size_t f = 0; f < frame_count; ++f) {
    const double t = static_cast<double>(f) * 1000.0 / spec.fps;
    PoseFrame frame;
    frame.frame_index = static_cast<std::int64_t>(f);
    frame.time_ms = std::llround(t);
    for (std::size_t j = 0; j < J; ++j) {
      const Perturbation& p = spec.perturbation(j);
      truth.time_shift_ms[j] = p.time_shift_ms;
      auto& r = dancer_rng[j];
      std::normal_distribution<double> noise(0.0, p.angular_noise_sd > 0 ? p.angular_noise_sd : 1.0);
      std::array<double, kNumParts> angles{};
      for (std::size_t i = 0; i < kNumParts; ++i) {
        const double dev = p.angular_noise_sd > 0.0 ? noise(r) : 0.0;
        truth.angular_deviation[j][f][i] = dev;
        angles[i] = kGeometry[i].base_angle + choreo.offset(i, t - p.time_shift_ms) + dev;
      }
      double x = 200.0 + kSpacingPx * static_cast<double>(j);
      double y = 300.0;
      if (spec.crossing && j < 2) {
        // Dancers 0 and 1 trade places over the middle half, one passing in front.
        const double u = std::clamp((t / spec.duration_ms - 0.25) / 0.5, 0.0, 1.0);
        const double travel = kSpacingPx * (0.5 - 0.5 * std::cos(kPi * u));
        x = j == 0 ? 200.0 + travel : 200.0 + kSpacingPx - travel;
        y = j == 0 ? 300.0 + 40.0 * std::sin(kPi * u) : 300.0 - 40.0 * std::sin(kPi * u);
      }
      Skeleton s = pose(angles, x, y, scale[j]);
      std::bernoulli_distribution drop(p.dropout_prob);
      for (auto& k : s.keypoints) {
        k.confidence = conf(r);
        if (p.dropout_prob > 0.0 && drop(r)) {
          // A failed detection: a poor position guess reported with low confidence.
          k = {k.x + kDropoutJitterPx * jitter(r), k.y + kDropoutJitterPx * jitter(r),
               0.1 * low(r)};
          ++truth.dropped[j][f];
        }
      }
      frame.skeletons.push_back(s);
      PoseFrame single{frame.frame_index, frame.time_ms, {s}};
      out.individual[j].frames.push_back(std::move(single));
    }
    std::vector<std::size_t> order(J);
    for (std::size_t j = 0; j < J; ++j) order[j] = j;
    std::shuffle(order.begin(), order.end(), rng);
    PoseFrame shuffled{frame.frame_index, frame.time_ms, {}};
    for (std::size_t k : order) shuffled.skeletons.push_back(frame.skeletons[k]);
    truth.identity.push_back(order);
    out.group.frames.push_back(std::move(shuffled));
  }
  return out;
}

namespace {

// Ground-truth dancer of tracked entry (k, f), or nullopt for carried entries
// that match nothing in the source frame.
std::optional<std::size_t> dancer_of(const SyntheticSession& session, const TrackedEntry& e,
                                     std::size_t f) {
  const auto& skeletons = session.group.frames[f].skeletons;
  for (std::size_t k = 0; k < skeletons.size(); ++k) {
    if (skeletons[k] == e.skeleton) return session.truth.identity[f][k];
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::size_t> identity_mapping(const SyntheticSession& session,
                                          const TrackedSequence& tracked) {
  std::vector<std::size_t> mapping(tracked.dancer_count(), 0);
  for (std::size_t k = 0; k < tracked.dancer_count(); ++k) {
    std::map<std::size_t, std::size_t> votes;
    for (std::size_t f = 0; f < tracked.frame_count(); ++f) {
      if (const auto d = dancer_of(session, tracked.timelines[k][f], f)) ++votes[*d];
    }
    std::size_t best = 0;
    for (const auto& [dancer, count] : votes) {
      if (count > best) {
        best = count;
        mapping[k] = dancer;
      }
    }
  }
  return mapping;
}

double tracking_accuracy(const SyntheticSession& session, const TrackedSequence& tracked) {
  if (tracked.frame_count() == 0) return 0.0;
  std::size_t correct = 0, total = 0;
  for (std::size_t k = 0; k < tracked.dancer_count(); ++k) {
    const auto first = dancer_of(session, tracked.timelines[k][0], 0);
    for (std::size_t f = 0; f < tracked.frame_count(); ++f) {
      ++total;
      const auto d = dancer_of(session, tracked.timelines[k][f], f);
      if (first && d && *d == *first) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

MetricSummary evaluate_metrics(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) {
    throw Error(ErrorCode::kInvalidArgument, "prediction and truth lengths differ");
  }
  if (predictions.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument, "at least three paired samples are needed");
  }
  MetricSummary m;
  m.rmse = rmse(predictions, truth);
  const auto r = pearson(predictions, truth);
  if (!r) {
    throw Error(ErrorCode::kDegenerateVariance,
                "correlation undefined: a series is constant");
  }
  m.pearson_r = *r;
  m.p_value = pearson_p_value(*r, predictions.size());
  return m;
}

AlignmentEval evaluate_alignment(const SyntheticSession& session, std::size_t n_bins) {
  AlignmentEval eval;
  const TrackedSequence tracked = track(session.group);
  const auto mapping = identity_mapping(session, tracked);
  const auto leader_it = std::find(mapping.begin(), mapping.end(), std::size_t{0});
  if (leader_it == mapping.end()) return eval;
  const auto leader = static_cast<std::size_t>(leader_it - mapping.begin());
  const auto segs = build_segments(session.truth.beats, session.group);
  if (segs.size() < 2) return eval;

  std::vector<ImpactEnvelope> envelopes;
  for (const auto& tl : tracked.timelines) envelopes.push_back(dancer_envelope(tl, n_bins));
  const double frame_ms = 1000.0 / tracked.fps;
  double abs_error = 0.0;
  std::size_t aligned = 0;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto result = alignment_for_segment(envelopes, leader, segs, s, tracked.fps);
    for (const auto& f : result.followers) {
      ++eval.segments;
      if (!f.shift) {
        ++eval.failed;
        continue;
      }
      const double expected =
          session.truth.time_shift_ms[mapping[f.follower]] - session.truth.time_shift_ms[0];
      const double err = std::abs(f.shift->tau_ms - expected);
      abs_error += err;
      ++aligned;
      if (err <= frame_ms + 1e-6) ++eval.recovered;
    }
  }
  eval.mean_abs_error_ms = aligned ? abs_error / static_cast<double>(aligned) : 0.0;
  return eval;
}

RatingDataset synthetic_rating_dataset(std::size_t samples, std::size_t sources,
                                       std::uint64_t seed, RatingLabel label, double lambda) {
  if (sources == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one source");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(0.0, 0.9);
  std::normal_distribution<double> spread(0.0, 0.1);
  const double max_bpd = std::pow(2.0, lambda);
  RatingDataset data;
  for (std::size_t n = 0; n < samples; ++n) {
    RatingSample s;
    s.source_id = "source-" + std::to_string(n % sources);
    s.frame = static_cast<std::int64_t>(n / sources);
    const double base = level(rng);
    double sum = 0.0;
    for (auto& v : s.bpd) {
      v = std::clamp(base + spread(rng), 0.0, max_bpd);
      sum += v;
    }
    if (label == RatingLabel::kLinear) {
      s.rating = std::clamp(1.0 - sum / static_cast<double>(kNumParts), 0.0, 1.0);
    } else {
      s.rating = ops_predict(addition_model(lambda), s.bpd);
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

AudioClip click_track(const BeatGrid& grid, double duration_ms, double sample_rate,
                      double offset_ms) {
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(static_cast<std::size_t>(duration_ms / 1000.0 * sample_rate), 0.0f);
  const auto burst = static_cast<std::size_t>(0.03 * sample_rate);
  for (double beat : grid.beat_times_ms) {
    const double t = beat + offset_ms;
    if (t < 0.0) continue;
    const auto start = static_cast<std::size_t>(std::llround(t / 1000.0 * sample_rate));
    for (std::size_t i = 0; i < burst && start + i < clip.samples.size(); ++i) {
      const double x = static_cast<double>(i) / sample_rate;
      clip.samples[start + i] +=
          static_cast<float>(0.8 * std::exp(-x / 0.006) * std::sin(2 * kPi * 1000.0 * x));
    }
  }
  return clip;
}

}  // namespace syncup
