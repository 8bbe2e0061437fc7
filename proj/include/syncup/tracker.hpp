#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "syncup/motion_model.hpp"

namespace syncup {

struct TrackedEntry {
  std::int64_t frame_index = 0;
  std::int64_t time_ms = 0;
  Skeleton skeleton;
  bool carried = false;  // copy of the neighbouring frame's skeleton

  bool operator==(const TrackedEntry&) const = default;
};

using Timeline = std::vector<TrackedEntry>;

struct TrackedSequence {
  double fps = 30.0;
  std::vector<Timeline> timelines;  // one per dancer identity

  std::size_t dancer_count() const { return timelines.size(); }
  std::size_t frame_count() const {
    return timelines.empty() ? 0 : timelines.front().size();
  }
  std::size_t carried_count() const;
};

// Sum of Euclidean distances between corresponding keypoints.
double skeleton_distance(const Skeleton& a, const Skeleton& b);

struct FrameAssignment {
  // For each previous identity, the index into `next` it was matched to, or
  // nullopt when the identity is carried over.
  std::vector<std::optional<std::size_t>> next_for_identity;
  // Indices into `next` dropped as surplus detections.
  std::vector<std::size_t> discarded;
  double cost = 0.0;
};

// Optimal one-to-one matching between the previous frame's identified
// skeletons and the current detections. Exhaustive search for up to four
// identities, Hungarian method above that; both return the lexicographically
// smallest identity mapping among equal-cost optima.
FrameAssignment assign_frame(std::span<const Skeleton> prev,
                             std::span<const Skeleton> next);

// Minimum-cost assignment over a square cost matrix (row -> column).
// Exposed for testing; `cost` is row-major n x n.
std::vector<std::size_t> hungarian(std::span<const double> cost,
                                   std::size_t n);

// Identity tracking over a whole recording. The dancer count is the modal
// skeleton count; identities are seeded from the earliest frame with that
// count (ordered by position) and propagated both forwards and backwards.
TrackedSequence track(const Recording& r);

}  // namespace syncup
