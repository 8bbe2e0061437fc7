#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "syncup/error.hpp"
#include "syncup/eval_harness.hpp"
#include "syncup/metrics.hpp"
#include "syncup/pose_similarity.hpp"

using namespace syncup;

namespace {

std::vector<double> predictions(const RegressorModel& m, const RatingDataset& d) {
  std::vector<double> out;
  for (const auto& s : d.samples) out.push_back(ops_predict(m, s.bpd));
  return out;
}

std::vector<double> labels(const RatingDataset& d) {
  std::vector<double> out;
  for (const auto& s : d.samples) out.push_back(s.rating);
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(Svr, FitsLinearLabels) {
  const auto data = synthetic_rating_dataset(400, 4, 1);
  const auto m = train_svr(data);
  ASSERT_TRUE(m.trained());
  EXPECT_LT(rmse(predictions(m, data), labels(data)), 0.02);
  std::size_t inside = 0;
  const auto p = predictions(m, data);
  for (std::size_t i = 0; i < p.size(); ++i) inside += std::abs(p[i] - data.samples[i].rating) <= 0.01 + 1e-9;
  EXPECT_GE(static_cast<double>(inside) / static_cast<double>(p.size()), 0.8);
}

TEST(Svr, DuplicatedDataWithHalfCIsSameModel) {
  const auto data = synthetic_rating_dataset(100, 2, 2);
  RatingDataset doubled = data;
  doubled.samples.insert(doubled.samples.end(), data.samples.begin(), data.samples.end());
  SvrOptions a;
  SvrOptions b = a;
  b.C = a.C / 2;
  const auto ma = train_svr(data, a), mb = train_svr(doubled, b);
  for (std::size_t i = 0; i < ma.parameters.size(); ++i) {
    EXPECT_NEAR(ma.parameters[i], mb.parameters[i], 1e-6);
  }
}

TEST(Svr, ConstantLabelsGiveFlatModel) {
  auto data = synthetic_rating_dataset(200, 2, 3);
  for (auto& s : data.samples) s.rating = 0.6;
  const auto m = train_svr(data);
  double norm = 0.0;
  for (std::size_t i = 0; i < kNumParts; ++i) norm += m.parameters[i] * m.parameters[i];
  EXPECT_LT(std::sqrt(norm), 0.05);
  for (double p : predictions(m, data)) EXPECT_NEAR(p, 0.6, 0.02);
}

TEST(Svr, ObjectiveNoWorseThanZero) {
  const auto data = synthetic_rating_dataset(150, 3, 4);
  const auto m = train_svr(data);
  std::vector<double> zero(kNumParts + 1, 0.0);
  EXPECT_LE(svr_objective(m.parameters, data, 10.0, 0.01), svr_objective(zero, data, 10.0, 0.01));
}

TEST(Svr, RequiresTwentySamples) {
  const auto data = synthetic_rating_dataset(19, 2, 5);
  EXPECT_EQ(code_of([&] { train_svr(data); }), ErrorCode::kTooFewSamples);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  const auto data = synthetic_rating_dataset(40, 2, 6);
  std::vector<const RatingSample*> batch;
  for (const auto& s : data.samples) batch.push_back(&s);
  for (auto arch : {NnArch::kShort, NnArch::kLong}) {
    const Mlp net(arch);
    auto params = net.initial_parameters(9);
    std::vector<double> grad(params.size());
    net.rmse_loss(params, batch, grad);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double h = 1e-6, keep = params[i];
      params[i] = keep + h;
      const double up = net.rmse_loss(params, batch, {});
      params[i] = keep - h;
      const double down = net.rmse_loss(params, batch, {});
      params[i] = keep;
      EXPECT_NEAR(grad[i], (up - down) / (2 * h), 1e-5) << "parameter " << i;
    }
  }
}

TEST(Mlp, LayerShapes) {
  EXPECT_EQ(Mlp(NnArch::kShort).parameter_count(), 14u);
  EXPECT_EQ(Mlp(NnArch::kLong).parameter_count(), 13u * 10 + 10 + 10 * 5 + 5 + 5 + 1);
  const auto p = Mlp(NnArch::kLong).initial_parameters(1);
  for (std::size_t i = 0; i < 140; ++i) EXPECT_LE(std::abs(p[i]), 1.0 / std::sqrt(13.0));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> params{0.0, 1.0, -2.0};
  const std::vector<double> grad{0.5, -3.0, 1e-3};
  AdamState st;
  NnOptions opts;
  adam_step(params, grad, st, opts);
  EXPECT_NEAR(params[0], -0.01, 1e-8);
  EXPECT_NEAR(params[1], 1.01, 1e-8);
  EXPECT_NEAR(params[2], -2.01, 1e-6);
}

TEST(Nn, ShortNetFitsAndLossDecreases) {
  const auto data = synthetic_rating_dataset(400, 4, 7);
  NnOptions opts;
  opts.epochs = 200;
  const auto m = train_nn(data, opts);
  EXPECT_LT(rmse(predictions(m, data), labels(data)), 0.05);
  ASSERT_EQ(m.loss_curve.size(), 200u);
  EXPECT_LE(m.loss_curve[49], m.loss_curve[0]);
}

TEST(Nn, DeterministicForSeed) {
  const auto data = synthetic_rating_dataset(100, 2, 8);
  NnOptions opts;
  opts.arch = NnArch::kLong;
  opts.epochs = 20;
  opts.seed = 11;
  EXPECT_EQ(train_nn(data, opts), train_nn(data, opts));
  auto other = opts;
  other.seed = 12;
  EXPECT_NE(train_nn(data, opts).parameters, train_nn(data, other).parameters);
}

TEST(Model, SerializeRoundTrip) {
  const auto data = synthetic_rating_dataset(60, 2, 9);
  NnOptions opts;
  opts.epochs = 5;
  const auto m = train_nn(data, opts, 0.5);
  EXPECT_EQ(parse_model(serialize_model(m)), m);
  const auto a = addition_model(1.2);
  EXPECT_EQ(parse_model(serialize_model(a)), a);
}

TEST(Model, RejectsOtherVersionsAndUntrained) {
  EXPECT_EQ(code_of([] { parse_model("syncup-model 2\nmethod svr\n"); }), ErrorCode::kVersionMismatch);
  EXPECT_EQ(code_of([] { parse_model("hello"); }), ErrorCode::kMalformedRecord);
  RegressorModel svr;
  svr.method = OpsMethod::kSvr;
  std::array<double, kNumParts> x{};
  EXPECT_EQ(code_of([&] { ops_predict(svr, x); }), ErrorCode::kUntrainedModel);
}

TEST(Ratings, LoneZeroAmongGoodIsDropped) {
  // mean 0.7143, population sd 0.1597: the 0.0 sits 4.47 sd out
  std::vector<std::vector<double>> frames(1, std::vector<double>(20, 0.75));
  frames[0].push_back(0.0);
  const auto out = aggregate_ratings(frames);
  EXPECT_DOUBLE_EQ(out[0], 0.75);
}

TEST(Ratings, ModerateSpreadIsKept) {
  std::vector<std::vector<double>> frames{{0.0, 0.25, 0.5, 0.75, 1.0}};
  EXPECT_DOUBLE_EQ(aggregate_ratings(frames)[0], 0.5);
}

TEST(Ratings, DropsFarOutliers) {
  std::vector<std::vector<double>> frames{{0.75, 0.75, 0.75}, {1.0, 0.5, 0.75}};
  for (int k = 0; k < 40; ++k) frames[0].push_back(0.75);
  frames[0].push_back(0.0);
  const auto out = aggregate_ratings(frames);
  EXPECT_DOUBLE_EQ(out[0], 0.75);
  EXPECT_DOUBLE_EQ(out[1], 0.75);
  std::vector<std::vector<double>> few{{1.0, 0.5}};
  EXPECT_EQ(code_of([&] { aggregate_ratings(few); }), ErrorCode::kTooFewRatings);
}

TEST(Ratings, LikertScale) {
  EXPECT_EQ(likert_score("Excellent"), 1.0);
  EXPECT_EQ(likert_score("Good"), 0.75);
  EXPECT_EQ(likert_score("Fair"), 0.5);
  EXPECT_EQ(likert_score("Poor"), 0.25);
  EXPECT_EQ(likert_score("Very Bad"), 0.0);
  EXPECT_THROW(likert_score("Meh"), Error);
}

TEST(RatingCsv, RoundTripAndValidation) {
  const auto data = synthetic_rating_dataset(25, 3, 10);
  const auto back = parse_rating_csv(format_rating_csv(data));
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back.samples[i].bpd, data.samples[i].bpd);
    EXPECT_EQ(back.samples[i].rating, data.samples[i].rating);
    EXPECT_EQ(back.samples[i].source_id, data.samples[i].source_id);
  }
  EXPECT_EQ(back.sources().size(), 3u);
  EXPECT_EQ(code_of([] { parse_rating_csv("a,1,2\n"); }), ErrorCode::kMalformedRecord);
}

TEST(CrossValidate, AdditionLabelsAreSelfConsistent) {
  const auto data = synthetic_rating_dataset(90, 3, 11, RatingLabel::kAddition, 0.885);
  const std::array methods{OpsMethod::kAddition};
  const auto res = cross_validate(data, methods);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].folds, 3u);
  EXPECT_LT(res[0].rmse, 1e-12);
}

TEST(CrossValidate, HeldOutPredictionsCoverEverySample) {
  const auto data = synthetic_rating_dataset(120, 4, 12);
  const std::array methods{OpsMethod::kSvr, OpsMethod::kNnShort};
  CvOptions opts;
  opts.nn.epochs = 30;
  opts.svr.epochs = 500;
  const auto res = cross_validate(data, methods, opts);
  ASSERT_EQ(res.size(), 2u);
  for (const auto& r : res) {
    EXPECT_EQ(r.predictions.size(), data.size());
    EXPECT_EQ(r.folds, 4u);
    ASSERT_TRUE(r.pearson_r);
    EXPECT_GT(*r.pearson_r, 0.8);
  }
}

TEST(CrossValidate, Errors) {
  auto one = synthetic_rating_dataset(40, 1, 13);
  const std::array methods{OpsMethod::kSvr};
  EXPECT_EQ(code_of([&] { cross_validate(one, methods); }), ErrorCode::kSingleSource);
  auto thin = synthetic_rating_dataset(30, 2, 14);
  EXPECT_EQ(code_of([&] { cross_validate(thin, methods); }), ErrorCode::kTooFewSamples);
}
