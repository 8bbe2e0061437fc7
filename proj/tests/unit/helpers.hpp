#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "syncup/motion_model.hpp"
#include "syncup/pose_similarity.hpp"
#include "syncup/tracker.hpp"

namespace testing_helpers {

using namespace syncup;

inline Skeleton random_skeleton(std::mt19937_64& rng, double cx = 300, double cy = 300,
                                double spread = 80) {
  std::uniform_real_distribution<double> d(-spread, spread);
  std::uniform_real_distribution<double> c(0.5, 1.0);
  Skeleton s;
  for (auto& k : s.keypoints) k = {cx + d(rng), cy + d(rng), c(rng)};
  return s;
}

inline Skeleton translated(Skeleton s, double dx, double dy) {
  for (auto& k : s.keypoints) {
    k.x += dx;
    k.y += dy;
  }
  return s;
}

// Skeleton whose 13 body-part directions are the given angles (radians).
inline Skeleton skeleton_from_angles(const std::array<double, kNumParts>& angles,
                                     double x0 = 0, double y0 = 0, double len = 50) {
  Skeleton s;
  for (auto& k : s.keypoints) k = {x0, y0, 1.0};
  const auto& parts = body_parts();
  for (std::size_t i = 0; i < kNumParts; ++i) {
    const Keypoint& a = s[parts[i].from];
    s[parts[i].to] = {a.x + len * std::cos(angles[i]), a.y + len * std::sin(angles[i]), 1.0};
  }
  return s;
}

inline std::string frame_line(std::int64_t frame, std::int64_t time_ms,
                              const std::vector<Skeleton>& skeletons) {
  std::ostringstream out;
  out.precision(10);
  out << "{\"frame\":" << frame << ",\"time_ms\":" << time_ms << ",\"skeletons\":[";
  for (std::size_t k = 0; k < skeletons.size(); ++k) {
    if (k) out << ',';
    out << "{\"keypoints\":[";
    for (std::size_t i = 0; i < skeletons[k].keypoints.size(); ++i) {
      const auto& p = skeletons[k].keypoints[i];
      if (i) out << ',';
      out << '[' << p.x << ',' << p.y << ',' << p.confidence << ']';
    }
    out << "]}";
  }
  out << "]}";
  return out.str();
}

inline Recording recording_of(const std::vector<std::vector<Skeleton>>& frames, double fps = 30) {
  Recording r;
  r.fps = fps;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    r.frames.push_back({static_cast<std::int64_t>(f),
                        std::llround(static_cast<double>(f) * 1000.0 / fps), frames[f]});
  }
  return r;
}

}  // namespace testing_helpers
