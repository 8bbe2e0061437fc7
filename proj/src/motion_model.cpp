#include "syncup/motion_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "syncup/error.hpp"

namespace syncup {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumKeypoints> kJointNames = {
    "nose",    "neck",    "r_shoulder", "r_elbow", "r_wrist", "l_shoulder",
    "l_elbow", "l_wrist", "r_hip",      "r_knee",  "r_ankle", "l_hip",
    "l_knee",  "l_ankle", "r_eye",      "l_eye",   "r_ear",   "l_ear"};

std::string line_label(std::size_t line_no) {
  return "line " + std::to_string(line_no);
}

Skeleton parse_skeleton(const json& obj, std::size_t line_no,
                        std::int64_t frame) {
  if (!obj.is_object() || !obj.contains("keypoints") ||
      !obj["keypoints"].is_array()) {
    throw Error(ErrorCode::kMalformedRecord,
                line_label(line_no) + ": skeleton without keypoints array");
  }
  const auto& kps = obj["keypoints"];
  if (kps.size() != kNumKeypoints) {
    throw Error(ErrorCode::kBadKeypointCount,
                "frame " + std::to_string(frame) + " (" +
                    line_label(line_no) + ") has " +
                    std::to_string(kps.size()) + " keypoints, expected 18");
  }
  Skeleton s;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const auto& triple = kps[i];
    if (!triple.is_array() || triple.size() != 3 ||
        !std::all_of(triple.begin(), triple.end(),
                     [](const json& v) { return v.is_number(); })) {
      throw Error(ErrorCode::kMalformedRecord,
                  line_label(line_no) + ": keypoint " + std::to_string(i) +
                      " is not an [x, y, confidence] triple");
    }
    Keypoint k{triple[0].get<double>(), triple[1].get<double>(),
               triple[2].get<double>()};
    if (!std::isfinite(k.x) || !std::isfinite(k.y) ||
        !(k.confidence >= 0.0 && k.confidence <= 1.0)) {
      throw Error(ErrorCode::kMalformedRecord,
                  line_label(line_no) + ": keypoint " + std::to_string(i) +
                      " out of range");
    }
    s.keypoints[i] = k;
  }
  return s;
}

}  // namespace

std::string_view joint_name(Joint j) { return kJointNames[index_of(j)]; }

double Skeleton::mean_confidence() const {
  double sum = 0.0;
  for (const auto& k : keypoints) sum += k.confidence;
  return sum / static_cast<double>(kNumKeypoints);
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kGroup: return "group";
    case Role::kLeader: return "leader";
    case Role::kFollower: return "follower";
  }
  return "group";
}

Role role_from_string(std::string_view s) {
  if (s == "group") return Role::kGroup;
  if (s == "leader") return Role::kLeader;
  if (s == "follower") return Role::kFollower;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown role '" + std::string(s) + "'");
}

std::int64_t Recording::start_ms() const {
  return frames.empty() ? 0 : frames.front().time_ms;
}

double Recording::end_ms() const {
  if (frames.empty()) return 0.0;
  return static_cast<double>(frames.back().time_ms) + 1000.0 / fps;
}

Recording parse_pose_stream(std::string_view text, std::optional<double> fps) {
  Recording rec;
  std::optional<double> header_fps;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool seen_frame = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw Error(ErrorCode::kMalformedRecord,
                  line_label(line_no) + ": not a JSON object");
    }

    if (!obj.contains("frame")) {
      // Header record.
      if (seen_frame || !obj.contains("fps") || !obj["fps"].is_number()) {
        throw Error(ErrorCode::kMalformedRecord,
                    line_label(line_no) + ": missing 'frame' field");
      }
      header_fps = obj["fps"].get<double>();
      if (obj.contains("recording_id") && obj["recording_id"].is_string()) {
        rec.id = obj["recording_id"].get<std::string>();
      }
      continue;
    }

    seen_frame = true;
    if (!obj["frame"].is_number_integer() || !obj.contains("time_ms") ||
        !obj["time_ms"].is_number() || !obj.contains("skeletons") ||
        !obj["skeletons"].is_array()) {
      throw Error(ErrorCode::kMalformedRecord,
                  line_label(line_no) +
                      ": frame record needs integer 'frame', 'time_ms' and "
                      "'skeletons'");
    }
    PoseFrame frame;
    frame.frame_index = obj["frame"].get<std::int64_t>();
    frame.time_ms = static_cast<std::int64_t>(
        std::llround(obj["time_ms"].get<double>()));
    if (frame.frame_index < 0) {
      throw Error(ErrorCode::kMalformedRecord,
                  line_label(line_no) + ": negative frame index");
    }
    for (const auto& s : obj["skeletons"]) {
      frame.skeletons.push_back(parse_skeleton(s, line_no, frame.frame_index));
    }

    if (!rec.frames.empty()) {
      const auto& prev = rec.frames.back();
      if (frame.frame_index <= prev.frame_index ||
          frame.time_ms < prev.time_ms) {
        throw Error(ErrorCode::kNonMonotonicTime,
                    line_label(line_no) + ": frame " +
                        std::to_string(frame.frame_index) + " at " +
                        std::to_string(frame.time_ms) + " ms follows frame " +
                        std::to_string(prev.frame_index) + " at " +
                        std::to_string(prev.time_ms) + " ms");
      }
    }
    rec.frames.push_back(std::move(frame));
  }

  if (rec.frames.empty()) {
    throw Error(ErrorCode::kEmptyRecording, "pose stream has no frames");
  }
  rec.fps = fps.value_or(header_fps.value_or(0.0));
  if (!(rec.fps > 0.0) || !std::isfinite(rec.fps)) {
    throw Error(ErrorCode::kInvalidArgument,
                "frame rate must be given and positive");
  }
  return rec;
}

std::string serialize_pose_stream(const Recording& r) {
  std::string out;
  json header = {{"fps", r.fps}};
  if (!r.id.empty()) header["recording_id"] = r.id;
  out += header.dump();
  out += '\n';
  for (const auto& f : r.frames) {
    json skels = json::array();
    for (const auto& s : f.skeletons) {
      json kps = json::array();
      for (const auto& k : s.keypoints) kps.push_back({k.x, k.y, k.confidence});
      skels.push_back({{"keypoints", std::move(kps)}});
    }
    json rec = {{"frame", f.frame_index},
                {"time_ms", f.time_ms},
                {"skeletons", std::move(skels)}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::size_t modal_skeleton_count(const Recording& r) {
  std::map<std::size_t, std::size_t> histogram;
  std::vector<std::size_t> first_seen_order;
  for (const auto& f : r.frames) {
    auto [it, inserted] = histogram.try_emplace(f.skeletons.size(), 0);
    if (inserted) first_seen_order.push_back(f.skeletons.size());
    ++it->second;
  }
  std::size_t best = 0, best_votes = 0;
  for (std::size_t count : first_seen_order) {
    if (histogram[count] > best_votes) {
      best = count;
      best_votes = histogram[count];
    }
  }
  return best;
}

ValidationReport validate_recording(const Recording& r,
                                    double confidence_threshold) {
  ValidationReport report;
  report.modal_count = modal_skeleton_count(r);
  const double nominal_spacing = 1000.0 / r.fps;
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const auto& f = r.frames[i];
    for (std::size_t s = 0; s < f.skeletons.size(); ++s) {
      const double mean = f.skeletons[s].mean_confidence();
      if (mean < confidence_threshold) {
        report.low_confidence.push_back({f.frame_index, s, mean});
      }
    }
    if (f.skeletons.size() != report.modal_count) {
      report.count_anomalies.push_back({f.frame_index, f.skeletons.size()});
    }
    if (i > 0) {
      const auto spacing = f.time_ms - r.frames[i - 1].time_ms;
      // time_ms is integral, so allow one millisecond of rounding.
      if (std::abs(static_cast<double>(spacing) - nominal_spacing) >
          0.1 * nominal_spacing + 1.0) {
        report.timing_anomalies.push_back({f.frame_index, spacing});
      }
    }
  }
  return report;
}

}  // namespace syncup
