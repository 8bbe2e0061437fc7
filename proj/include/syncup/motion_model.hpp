#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace syncup {

// Fixed 18-point layout produced by OpenPose/AlphaPose style estimators.
enum class Joint : std::uint8_t {
  kNose = 0,
  kNeck,
  kRShoulder,
  kRElbow,
  kRWrist,
  kLShoulder,
  kLElbow,
  kLWrist,
  kRHip,
  kRKnee,
  kRAnkle,
  kLHip,
  kLKnee,
  kLAnkle,
  kREye,
  kLEye,
  kREar,
  kLEar,
};

inline constexpr std::size_t kNumKeypoints = 18;

constexpr std::size_t index_of(Joint j) { return static_cast<std::size_t>(j); }
std::string_view joint_name(Joint j);

struct Keypoint {
  double x = 0.0;  // pixels, image coordinates
  double y = 0.0;  // pixels, down-positive
  double confidence = 0.0;

  bool operator==(const Keypoint&) const = default;
};

struct Skeleton {
  std::array<Keypoint, kNumKeypoints> keypoints{};

  const Keypoint& operator[](Joint j) const { return keypoints[index_of(j)]; }
  Keypoint& operator[](Joint j) { return keypoints[index_of(j)]; }
  double mean_confidence() const;

  bool operator==(const Skeleton&) const = default;
};

struct PoseFrame {
  std::int64_t frame_index = 0;
  std::int64_t time_ms = 0;
  std::vector<Skeleton> skeletons;  // unordered; identities not yet assigned
};

enum class Role { kGroup, kLeader, kFollower };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct Recording {
  std::string id;
  double fps = 30.0;
  std::vector<PoseFrame> frames;
  Role role = Role::kGroup;
  std::optional<std::string> audio_ref;

  std::int64_t start_ms() const;
  // End of the last frame's display interval (last time_ms + one frame).
  double end_ms() const;
};

// Parses the line-delimited pose-stream format: an optional header record
// {"fps":..,"recording_id":..} followed by one frame record per line. An
// explicit `fps` overrides the header value.
Recording parse_pose_stream(std::string_view text,
                            std::optional<double> fps = std::nullopt);

std::string serialize_pose_stream(const Recording& r);

inline constexpr double kDefaultConfidenceThreshold = 0.2;

struct ValidationReport {
  struct LowConfidence {
    std::int64_t frame_index;
    std::size_t skeleton;
    double mean_confidence;
  };
  struct CountAnomaly {
    std::int64_t frame_index;
    std::size_t count;
  };
  struct TimingAnomaly {
    std::int64_t frame_index;
    std::int64_t spacing_ms;
  };

  std::size_t modal_count = 0;
  std::vector<LowConfidence> low_confidence;
  std::vector<CountAnomaly> count_anomalies;
  std::vector<TimingAnomaly> timing_anomalies;

  bool empty() const {
    return low_confidence.empty() && count_anomalies.empty() &&
           timing_anomalies.empty();
  }
};

// Most frequent skeleton count; ties go to the count seen first.
std::size_t modal_skeleton_count(const Recording& r);

ValidationReport validate_recording(
    const Recording& r,
    double confidence_threshold = kDefaultConfidenceThreshold);

}  // namespace syncup
