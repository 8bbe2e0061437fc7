#include <gtest/gtest.h>

#include "helpers.hpp"
#include "syncup/error.hpp"

using namespace syncup;
using namespace testing_helpers;

namespace {

ErrorCode parse_error(const std::string& text) {
  try {
    parse_pose_stream(text, 30.0);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for: " << text;
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(PoseStream, ParsesFramesAndSkeletons) {
  std::mt19937_64 rng(1);
  std::vector<Skeleton> a{random_skeleton(rng), random_skeleton(rng), random_skeleton(rng)};
  std::vector<Skeleton> b{random_skeleton(rng), random_skeleton(rng), random_skeleton(rng)};
  const std::string text = "{\"fps\":30,\"recording_id\":\"r1\"}\n" + frame_line(0, 0, a) +
                           "\n" + frame_line(1, 33, b) + "\n";
  const Recording r = parse_pose_stream(text);
  EXPECT_EQ(r.id, "r1");
  EXPECT_DOUBLE_EQ(r.fps, 30.0);
  ASSERT_EQ(r.frames.size(), 2u);
  EXPECT_EQ(r.frames[0].skeletons.size(), 3u);
  EXPECT_EQ(r.frames[1].skeletons.size(), 3u);
  EXPECT_EQ(r.frames[1].time_ms, 33);
  EXPECT_NEAR(r.frames[1].skeletons[2].keypoints[5].x, b[2].keypoints[5].x, 1e-6);
}

TEST(PoseStream, EmptyInputIsEmptyRecording) {
  EXPECT_EQ(parse_error(""), ErrorCode::kEmptyRecording);
  EXPECT_EQ(parse_error("{\"fps\":30}\n\n"), ErrorCode::kEmptyRecording);
}

TEST(PoseStream, SeventeenKeypointsNamesFrame) {
  std::mt19937_64 rng(2);
  std::string line = frame_line(7, 233, {random_skeleton(rng)});
  const auto last = line.rfind(",[");
  line = line.substr(0, last) + "]}]}";
  try {
    parse_pose_stream(frame_line(6, 200, {random_skeleton(rng)}) + "\n" + line, 30.0);
    FAIL() << "expected BadKeypointCount";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadKeypointCount);
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos) << e.what();
  }
}

TEST(PoseStream, RejectsMalformedAndOutOfOrder) {
  std::mt19937_64 rng(3);
  const auto s = random_skeleton(rng);
  EXPECT_EQ(parse_error("{not json"), ErrorCode::kMalformedRecord);
  EXPECT_EQ(parse_error("{\"frame\":0}"), ErrorCode::kMalformedRecord);
  EXPECT_EQ(parse_error(frame_line(1, 33, {s}) + "\n" + frame_line(0, 0, {s})),
            ErrorCode::kNonMonotonicTime);
  auto bad = s;
  bad.keypoints[0].confidence = 1.5;
  EXPECT_EQ(parse_error(frame_line(0, 0, {bad})), ErrorCode::kMalformedRecord);
}

TEST(PoseStream, NeedsFrameRate) {
  std::mt19937_64 rng(4);
  try {
    parse_pose_stream(frame_line(0, 0, {random_skeleton(rng)}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(PoseStream, RoundTrip) {
  std::mt19937_64 rng(5);
  std::vector<std::vector<Skeleton>> frames;
  for (int f = 0; f < 12; ++f) {
    std::vector<Skeleton> sk;
    for (int k = 0; k < 1 + f % 3; ++k) sk.push_back(random_skeleton(rng));
    frames.push_back(sk);
  }
  Recording r = recording_of(frames, 25.0);
  r.id = "round";
  const Recording back = parse_pose_stream(serialize_pose_stream(r));
  EXPECT_EQ(back.id, r.id);
  EXPECT_DOUBLE_EQ(back.fps, r.fps);
  ASSERT_EQ(back.frames.size(), r.frames.size());
  for (std::size_t f = 0; f < r.frames.size(); ++f) {
    EXPECT_EQ(back.frames[f].frame_index, r.frames[f].frame_index);
    EXPECT_EQ(back.frames[f].time_ms, r.frames[f].time_ms);
    ASSERT_EQ(back.frames[f].skeletons.size(), r.frames[f].skeletons.size());
    for (std::size_t k = 0; k < r.frames[f].skeletons.size(); ++k) {
      for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const auto& p = r.frames[f].skeletons[k].keypoints[i];
        const auto& q = back.frames[f].skeletons[k].keypoints[i];
        EXPECT_NEAR(p.x, q.x, 1e-6);
        EXPECT_NEAR(p.y, q.y, 1e-6);
        EXPECT_NEAR(p.confidence, q.confidence, 1e-6);
      }
    }
  }
}

TEST(Validation, CleanRecordingGivesEmptyReport) {
  std::mt19937_64 rng(6);
  std::vector<std::vector<Skeleton>> frames;
  for (int f = 0; f < 10; ++f) {
    std::vector<Skeleton> sk;
    for (int k = 0; k < 3; ++k) {
      auto s = random_skeleton(rng);
      for (auto& p : s.keypoints) p.confidence = 0.9;
      sk.push_back(s);
    }
    frames.push_back(sk);
  }
  const auto report = validate_recording(recording_of(frames));
  EXPECT_TRUE(report.empty());
  EXPECT_EQ(report.modal_count, 3u);
}

TEST(Validation, FlagsCountAndConfidenceAnomalies) {
  std::mt19937_64 rng(7);
  std::vector<std::vector<Skeleton>> frames;
  for (int f = 0; f < 10; ++f) {
    std::vector<Skeleton> sk;
    for (int k = 0; k < 3; ++k) {
      auto s = random_skeleton(rng);
      for (auto& p : s.keypoints) p.confidence = 0.9;
      sk.push_back(s);
    }
    frames.push_back(sk);
  }
  frames[4].pop_back();
  for (auto& p : frames[7][1].keypoints) p.confidence = 0.0;
  const auto report = validate_recording(recording_of(frames));
  ASSERT_EQ(report.count_anomalies.size(), 1u);
  EXPECT_EQ(report.count_anomalies[0].frame_index, 4);
  EXPECT_EQ(report.count_anomalies[0].count, 2u);
  ASSERT_EQ(report.low_confidence.size(), 1u);
  EXPECT_EQ(report.low_confidence[0].frame_index, 7);
  EXPECT_EQ(report.low_confidence[0].skeleton, 1u);
  EXPECT_TRUE(report.timing_anomalies.empty());
}

TEST(Validation, FlagsIrregularSpacing) {
  std::mt19937_64 rng(8);
  Recording r = recording_of({{random_skeleton(rng)}, {random_skeleton(rng)}, {random_skeleton(rng)}});
  r.frames[2].time_ms = 100;
  const auto report = validate_recording(r);
  ASSERT_EQ(report.timing_anomalies.size(), 1u);
  EXPECT_EQ(report.timing_anomalies[0].frame_index, 2);
}

TEST(Validation, IsPure) {
  std::mt19937_64 rng(9);
  Recording r = recording_of({{random_skeleton(rng)}, {random_skeleton(rng), random_skeleton(rng)}});
  const auto a = validate_recording(r), b = validate_recording(r);
  EXPECT_EQ(a.count_anomalies.size(), b.count_anomalies.size());
  EXPECT_EQ(a.low_confidence.size(), b.low_confidence.size());
  EXPECT_EQ(a.modal_count, b.modal_count);
}

TEST(Roles, StringConversions) {
  EXPECT_EQ(role_from_string("leader"), Role::kLeader);
  EXPECT_EQ(to_string(Role::kFollower), "follower");
  EXPECT_THROW(role_from_string("captain"), Error);
}
