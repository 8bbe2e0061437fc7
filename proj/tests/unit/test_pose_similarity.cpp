#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "syncup/error.hpp"
#include "syncup/pose_similarity.hpp"

using namespace syncup;
using namespace testing_helpers;

namespace {

std::array<double, kNumParts> random_angles(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
  std::array<double, kNumParts> out{};
  for (auto& x : out) x = a(rng);
  return out;
}

BpdFrame frame_of(const std::vector<Skeleton>& dancers, double lambda = kDefaultLambda) {
  std::vector<BodyPartVectors> v;
  for (const auto& s : dancers) v.push_back(body_part_vectors(s));
  return bpd_frame(v, lambda);
}

Skeleton rotated(const Skeleton& s, double theta, double scale, double dx, double dy) {
  Skeleton out = s;
  const double c = std::cos(theta), sn = std::sin(theta);
  for (auto& k : out.keypoints) {
    const double x = k.x, y = k.y;
    k.x = scale * (c * x - sn * y) + dx;
    k.y = scale * (sn * x + c * y) + dy;
  }
  return out;
}

}  // namespace

TEST(BodyParts, ThirteenEdgesOverBodyKeypoints) {
  ASSERT_EQ(body_parts().size(), 13u);
  for (const auto& p : body_parts()) {
    EXPECT_NE(p.from, p.to);
    EXPECT_FALSE(p.name.empty());
  }
}

TEST(BodyPartVectors, UnitLengthAndValidity) {
  std::mt19937_64 rng(1);
  Skeleton s = skeleton_from_angles(random_angles(rng), 100, 100, 37);
  auto v = body_part_vectors(s);
  for (std::size_t i = 0; i < kNumParts; ++i) {
    ASSERT_TRUE(v.valid[i]);
    EXPECT_NEAR(std::hypot(v.vectors[i].x, v.vectors[i].y), 1.0, 1e-12);
  }
  s[body_parts()[3].to].confidence = 0.05;
  v = body_part_vectors(s);
  EXPECT_FALSE(v.valid[3]);
  s[body_parts()[5].to] = s[body_parts()[5].from];
  v = body_part_vectors(s);
  EXPECT_FALSE(v.valid[5]);
}

TEST(Bpd, IdenticalPosesAreZero) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto angles = random_angles(rng);
    std::vector<Skeleton> dancers;
    for (int j = 0; j < 4; ++j) dancers.push_back(skeleton_from_angles(angles, 100.0 * j, 10, 40 + j));
    const auto f = frame_of(dancers);
    for (std::size_t i = 0; i < kNumParts; ++i) EXPECT_NEAR(f.bpd[i], 0.0, 1e-12);
  }
}

TEST(Bpd, OpposedPairIsOne) {
  std::array<double, kNumParts> a{}, b{};
  for (std::size_t i = 0; i < kNumParts; ++i) {
    a[i] = 0.3 * static_cast<double>(i);
    b[i] = a[i] + std::numbers::pi;
  }
  for (double lambda : lambda_grid()) {
    const auto f = frame_of({skeleton_from_angles(a), skeleton_from_angles(b)}, lambda);
    for (std::size_t i = 0; i < kNumParts; ++i) EXPECT_NEAR(f.bpd[i], 1.0, 1e-12);
  }
}

TEST(Bpd, LambdaOneIsMeanDistance) {
  std::mt19937_64 rng(3);
  std::vector<Skeleton> dancers;
  for (int j = 0; j < 3; ++j) dancers.push_back(skeleton_from_angles(random_angles(rng)));
  const auto f = frame_of(dancers, 1.0);
  for (std::size_t i = 0; i < kNumParts; ++i) {
    EXPECT_NEAR(f.bpd[i], f.d_raw[i] / 3.0, 1e-12);
    EXPECT_EQ(f.contributing_dancers[i], 3u);
  }
}

TEST(Bpd, RightAnglePairHandValue) {
  std::array<double, kNumParts> a{}, b{};
  b.fill(std::numbers::pi / 2);
  const auto f = frame_of({skeleton_from_angles(a), skeleton_from_angles(b)}, 1.0);
  // reference (0.5, 0.5); each unit vector is sqrt(0.5) away
  for (std::size_t i = 0; i < kNumParts; ++i) EXPECT_NEAR(f.bpd[i], std::sqrt(0.5), 1e-12);
}

TEST(BpdProperty, InvariantToTranslationRotationScale) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Skeleton> dancers, moved;
    const int count = 2 + trial % 4;
    const double theta = u(rng) * std::numbers::pi, scale = 1.5 + u(rng);
    for (int j = 0; j < count; ++j) {
      dancers.push_back(skeleton_from_angles(random_angles(rng), 50 * j, 0));
      moved.push_back(rotated(dancers.back(), theta, scale, 300 * u(rng), 300 * u(rng)));
    }
    const auto f0 = frame_of(dancers), f1 = frame_of(moved);
    for (std::size_t i = 0; i < kNumParts; ++i) EXPECT_NEAR(f0.bpd[i], f1.bpd[i], 1e-9);
  }
}

TEST(BpdProperty, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Skeleton> dancers;
    for (int j = 0; j < 2 + trial % 5; ++j) dancers.push_back(skeleton_from_angles(random_angles(rng)));
    const auto f0 = frame_of(dancers);
    std::shuffle(dancers.begin(), dancers.end(), rng);
    const auto f1 = frame_of(dancers);
    for (std::size_t i = 0; i < kNumParts; ++i) {
      EXPECT_NEAR(f0.bpd[i], f1.bpd[i], 1e-12);
      EXPECT_GE(f0.bpd[i], 0.0);
      EXPECT_LE(f0.bpd[i], 1.0 + 1e-12);
    }
  }
}

TEST(BpdProperty, LambdaOrdersValues) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Skeleton> dancers;
    for (int j = 0; j < 3; ++j) dancers.push_back(skeleton_from_angles(random_angles(rng)));
    const auto& grid = lambda_grid();
    for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
      const auto lo = frame_of(dancers, grid[g]), hi = frame_of(dancers, grid[g + 1]);
      for (std::size_t i = 0; i < kNumParts; ++i) EXPECT_GE(lo.bpd[i] + 1e-12, hi.bpd[i]);
    }
  }
}

TEST(LambdaGrid, LogUniformEndpoints) {
  const auto& g = lambda_grid();
  EXPECT_NEAR(g.front(), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(g.back(), 3.0, 1e-12);
  for (std::size_t k = 1; k + 1 < g.size(); ++k) EXPECT_NEAR(g[k] * g[k], g[k - 1] * g[k + 1], 1e-12);
}

TEST(Bpd, MissingPartsAndImputation) {
  std::mt19937_64 rng(7);
  Skeleton a = skeleton_from_angles(random_angles(rng));
  Skeleton b = skeleton_from_angles(random_angles(rng));
  a[body_parts()[0].to].confidence = 0.0;
  const auto f = frame_of({a, b});
  EXPECT_TRUE(f.missing[0]);
  EXPECT_EQ(f.contributing_dancers[0], 1u);
  EXPECT_EQ(f.bpd[0], 0.0);
  EXPECT_TRUE(f.any_missing());
  EXPECT_FALSE(f.all_missing());
  const auto x = impute_features(f);
  ASSERT_TRUE(x);
  double mean = 0.0;
  for (std::size_t i = 1; i < kNumParts; ++i) mean += f.bpd[i];
  mean /= 12.0;
  EXPECT_NEAR((*x)[0], mean, 1e-12);

  BpdFrame empty;
  empty.missing.fill(true);
  EXPECT_FALSE(impute_features(empty));
  EXPECT_THROW(frame_of({a, b}, 0.0), Error);
}

TEST(Addition, EndpointsAndMonotone) {
  for (double lambda : lambda_grid()) {
    const auto m = addition_model(lambda);
    std::array<double, kNumParts> zero{}, full{};
    full.fill(std::pow(2.0, lambda));
    EXPECT_DOUBLE_EQ(ops_predict(m, zero), 1.0);
    EXPECT_NEAR(ops_predict(m, full), 0.0, 1e-12);
    std::array<double, kNumParts> half{};
    half.fill(0.5);
    EXPECT_NEAR(ops_predict(m, half), 1.0 - 0.5 / std::pow(2.0, lambda), 1e-12);
  }
}

TEST(OpsMethod, StringRoundTrip) {
  for (auto m : {OpsMethod::kAddition, OpsMethod::kSvr, OpsMethod::kNnShort, OpsMethod::kNnLong}) {
    EXPECT_EQ(ops_method_from_string(to_string(m)), m);
  }
  EXPECT_THROW(ops_method_from_string("ridge"), Error);
}
