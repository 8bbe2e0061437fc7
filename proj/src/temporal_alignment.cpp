#include "syncup/temporal_alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "syncup/error.hpp"

namespace syncup {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMaxDefaultShiftSeconds = 1.5;

// Linearly fills low-confidence samples from the nearest confident ones.
std::vector<Vec2> filled_track(const Timeline& tl, std::size_t joint, double threshold) {
  const std::size_t n = tl.size();
  std::vector<Vec2> pos(n);
  std::vector<std::size_t> good;
  for (std::size_t t = 0; t < n; ++t) {
    const Keypoint& k = tl[t].skeleton.keypoints[joint];
    pos[t] = {k.x, k.y};
    if (k.confidence >= threshold) good.push_back(t);
  }
  if (good.empty()) {
    std::fill(pos.begin(), pos.end(), Vec2{});
    return pos;
  }
  for (std::size_t t = 0; t < good.front(); ++t) pos[t] = pos[good.front()];
  for (std::size_t t = good.back() + 1; t < n; ++t) pos[t] = pos[good.back()];
  for (std::size_t g = 0; g + 1 < good.size(); ++g) {
    const std::size_t a = good[g], b = good[g + 1];
    for (std::size_t t = a + 1; t < b; ++t) {
      const double f = static_cast<double>(t - a) / static_cast<double>(b - a);
      pos[t] = {pos[a].x + f * (pos[b].x - pos[a].x), pos[a].y + f * (pos[b].y - pos[a].y)};
    }
  }
  return pos;
}

double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

}  // namespace

std::vector<PoseFlow> pose_flow(const Timeline& timeline, double confidence_threshold) {
  if (timeline.size() < 2) {
    throw Error(ErrorCode::kTooShort, "pose flow needs at least two frames");
  }
  std::vector<PoseFlow> flow(timeline.size() - 1);
  for (std::size_t t = 0; t + 1 < timeline.size(); ++t) flow[t].t = t;
  for (std::size_t j = 0; j < kNumKeypoints; ++j) {
    const auto pos = filled_track(timeline, j, confidence_threshold);
    for (std::size_t t = 0; t + 1 < pos.size(); ++t) {
      flow[t].displacements[j] = {pos[t + 1].x - pos[t].x, pos[t + 1].y - pos[t].y};
    }
  }
  return flow;
}

double Posegram::bin_center(std::size_t k) const {
  return kTwoPi * static_cast<double>(k) / static_cast<double>(n_bins);
}

Posegram posegram(std::span<const PoseFlow> flow, std::size_t n_bins) {
  if (n_bins < 4 || n_bins % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "bin count must be even and at least 4");
  }
  Posegram pg;
  pg.n_bins = n_bins;
  pg.values.assign(flow.size() * n_bins, 0.0);
  const double half_width = kTwoPi / static_cast<double>(n_bins);
  for (std::size_t t = 0; t < flow.size(); ++t) {
    for (const Vec2& d : flow[t].displacements) {
      const double mag = std::hypot(d.x, d.y);
      if (mag == 0.0) continue;
      double angle = std::atan2(d.y, d.x);
      if (angle < 0.0) angle += kTwoPi;
      for (std::size_t k = 0; k < n_bins; ++k) {
        if (circular_distance(angle, pg.bin_center(k)) <= half_width + 1e-9) {
          pg.values[t * n_bins + k] += mag;
        }
      }
    }
  }
  return pg;
}

ImpactEnvelope impact_envelope(const Posegram& pg) {
  const std::size_t frames = pg.frames();
  if (frames == 0) throw Error(ErrorCode::kTooShort, "empty posegram");
  ImpactEnvelope env;
  env.values.assign(frames, 0.0);
  for (std::size_t t = 1; t < frames; ++t) {
    double u = 0.0;
    for (std::size_t k = 0; k < pg.n_bins; ++k) u += std::abs(pg.at(t, k) - pg.at(t - 1, k));
    env.values[t] = u;
  }
  return env;
}

ImpactEnvelope dancer_envelope(const Timeline& timeline, std::size_t n_bins,
                               double confidence_threshold) {
  const auto flow = pose_flow(timeline, confidence_threshold);
  ImpactEnvelope env = impact_envelope(posegram(flow, n_bins));
  env.values.push_back(0.0);
  return env;
}

SegmentShift segment_alignment(std::span<const double> leader, std::span<const double> follower,
                               std::span<const Segment> segs, std::size_t s, double fps,
                               const ShiftOptions& opts) {
  if (s >= segs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "segment index out of range");
  }
  const bool have_prev = s > 0;
  const bool have_next = s + 1 < segs.size();
  if (!have_prev && !have_next) {
    throw Error(ErrorCode::kInsufficientContext,
                "segment " + std::to_string(s) + " has no neighbouring segment");
  }
  const std::size_t lo = have_prev ? segs[s - 1].first_frame : segs[s].first_frame;
  const std::size_t hi = have_next ? segs[s + 1].last_frame : segs[s].last_frame;
  if (hi >= leader.size() || hi >= follower.size()) {
    throw Error(ErrorCode::kInvalidArgument, "envelope shorter than the segment window");
  }
  const std::size_t len = hi - lo + 1;
  const double seg_len = static_cast<double>(segs[s].frame_count());
  const double centre =
      0.5 * static_cast<double>(segs[s].first_frame + segs[s].last_frame);
  const double sigma = seg_len / 2.0;

  std::vector<double> a(len), b(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double d = (static_cast<double>(lo + i) - centre) / sigma;
    const double w = std::exp(-0.5 * d * d);
    a[i] = w * leader[lo + i];
    b[i] = w * follower[lo + i];
  }
  auto normalise = [](std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double energy = 0.0;
    for (double& x : v) {
      x -= mean;
      energy += x * x;
    }
    if (!(energy > 1e-18)) return false;
    const double scale = 1.0 / std::sqrt(energy);
    for (double& x : v) x *= scale;
    return true;
  };
  if (!normalise(a) || !normalise(b)) {
    throw Error(ErrorCode::kDegenerateVariance, "no motion in the alignment window");
  }

  long max_shift = std::min(static_cast<long>(std::floor(seg_len / 2.0)),
                            static_cast<long>(std::floor(kMaxDefaultShiftSeconds * fps)));
  if (opts.max_shift_ms) {
    max_shift = static_cast<long>(std::floor(*opts.max_shift_ms * fps / 1000.0 + 1e-9));
  }
  max_shift = std::clamp(max_shift, 0L, static_cast<long>(len) - 1);

  const auto n = static_cast<long>(len);
  std::vector<double> corr(2 * max_shift + 1, 0.0);
  for (long k = -max_shift; k <= max_shift; ++k) {
    double c = 0.0;
    for (long t = std::max(0L, -k); t < std::min(n, n - k); ++t) c += a[t] * b[t + k];
    corr[k + max_shift] = c;
  }

  const double peak = *std::max_element(corr.begin(), corr.end());
  std::vector<long> candidates;
  for (long i = 0; i < static_cast<long>(corr.size()); ++i) {
    const bool left_ok = i == 0 || corr[i] >= corr[i - 1];
    const bool right_ok = i + 1 == static_cast<long>(corr.size()) || corr[i] >= corr[i + 1];
    const bool strong = peak > 0.0 ? corr[i] >= opts.ambiguity_ratio * peak : corr[i] == peak;
    if (left_ok && right_ok && strong) candidates.push_back(i - max_shift);
  }
  long chosen = candidates.front();
  for (long k : candidates) {
    const double ck = corr[k + max_shift], cc = corr[chosen + max_shift];
    if (std::abs(k) < std::abs(chosen) || (std::abs(k) == std::abs(chosen) && ck > cc)) {
      chosen = k;
    }
  }

  SegmentShift out;
  out.shift_frames = static_cast<int>(chosen);
  out.tau_ms = static_cast<double>(chosen) / fps * 1000.0;
  out.peak_corr = corr[chosen + max_shift];
  out.low_confidence = candidates.size() > 1 || !(peak > 0.0);
  return out;
}

bool AlignmentResult::low_confidence() const {
  return std::any_of(followers.begin(), followers.end(),
                     [](const FollowerAlignment& f) { return f.shift && f.shift->low_confidence; });
}

bool AlignmentResult::all_missing() const {
  return std::none_of(followers.begin(), followers.end(),
                      [](const FollowerAlignment& f) { return f.shift.has_value(); });
}

AlignmentResult alignment_for_segment(std::span<const ImpactEnvelope> envelopes,
                                      std::size_t leader_id, std::span<const Segment> segs,
                                      std::size_t s, double fps, const ShiftOptions& opts) {
  if (leader_id >= envelopes.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "leader " + std::to_string(leader_id) + " does not exist");
  }
  if (envelopes.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "temporal alignment needs a follower");
  }
  AlignmentResult result;
  result.segment = s;
  result.leader = leader_id;
  for (std::size_t j = 0; j < envelopes.size(); ++j) {
    if (j == leader_id) continue;
    FollowerAlignment fa;
    fa.follower = j;
    try {
      fa.shift = segment_alignment(envelopes[leader_id].values, envelopes[j].values, segs, s,
                                   fps, opts);
      result.tau_total_ms += std::abs(fa.shift->tau_ms);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidArgument) throw;
      fa.failure = std::string(to_string(e.code()));
    }
    result.followers.push_back(std::move(fa));
  }
  return result;
}

AlignmentResult alignment_for_segment(const TrackedSequence& tracked, std::size_t leader_id,
                                      std::span<const Segment> segs, std::size_t s,
                                      std::size_t n_bins, const ShiftOptions& opts) {
  std::vector<ImpactEnvelope> envelopes;
  for (const auto& tl : tracked.timelines) envelopes.push_back(dancer_envelope(tl, n_bins));
  return alignment_for_segment(envelopes, leader_id, segs, s, tracked.fps, opts);
}

}  // namespace syncup
