#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "syncup/motion_model.hpp"

namespace syncup {

inline constexpr std::size_t kNumParts = 13;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;
};

// Torso-rooted skeleton tree over the 14 body keypoints (face excluded).
struct BodyPart {
  Joint from;
  Joint to;
  std::string_view name;
};
const std::array<BodyPart, kNumParts>& body_parts();

struct BodyPartVectors {
  std::array<Vec2, kNumParts> vectors{};
  std::array<bool, kNumParts> valid{};
};

// Unit direction of each of the 13 edges. An edge is invalid when either
// endpoint's confidence is below the threshold or it is shorter than 1e-6 px.
BodyPartVectors body_part_vectors(const Skeleton& s,
                                  double confidence_threshold = kDefaultConfidenceThreshold);

inline constexpr double kDefaultLambda = 0.885;

// The 10 log-uniform sensitivity values between 1/3 and 3.
const std::array<double, 10>& lambda_grid();

struct BpdFrame {
  std::int64_t t = 0;
  double lambda = kDefaultLambda;
  std::array<double, kNumParts> bpd{};    // (d / J_i)^lambda, 0 where missing
  std::array<double, kNumParts> d_raw{};  // accumulated distance to reference
  std::array<Vec2, kNumParts> reference{};
  std::array<std::size_t, kNumParts> contributing_dancers{};
  std::array<bool, kNumParts> missing{};  // fewer than two valid dancers

  bool any_missing() const;
  bool all_missing() const;
};

BpdFrame bpd_frame(std::span<const BodyPartVectors> dancers, double lambda,
                   std::int64_t t = 0);

// Regressor input: missing entries replaced by the mean of present ones.
// Returns nullopt when every part is missing.
std::optional<std::array<double, kNumParts>> impute_features(const BpdFrame& f);

enum class OpsMethod { kAddition, kSvr, kNnShort, kNnLong };

std::string_view to_string(OpsMethod m);
OpsMethod ops_method_from_string(std::string_view s);

struct RegressorModel {
  OpsMethod method = OpsMethod::kAddition;
  double lambda = kDefaultLambda;
  std::vector<double> parameters;  // flat; layout depends on method
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::vector<double> loss_curve;  // one entry per epoch

  bool trained() const;
  bool operator==(const RegressorModel&) const = default;
};

inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const RegressorModel& m);
RegressorModel parse_model(std::string_view text);

// Analytic Simple Addition model for the given lambda.
RegressorModel addition_model(double lambda);

// OPS in [0, 1]. Throws UntrainedModel for learned methods without parameters.
double ops_predict(const RegressorModel& model,
                   std::span<const double, kNumParts> bpd);

struct RatingSample {
  std::array<double, kNumParts> bpd{};
  double rating = 0.0;  // mean human rating in [0, 1]
  std::string source_id;
  std::int64_t frame = 0;
};

struct RatingDataset {
  std::vector<RatingSample> samples;

  std::size_t size() const { return samples.size(); }
  std::vector<std::string> sources() const;  // distinct, first-seen order
};

// CSV with header: source_id,frame,bpd_1..bpd_13,rating
RatingDataset parse_rating_csv(std::string_view text);
std::string format_rating_csv(const RatingDataset& data);

struct SvrOptions {
  double C = 10.0;
  double epsilon = 0.01;
  std::size_t epochs = 2000;
  std::uint64_t seed = 0;
};

// Linear epsilon-insensitive SVR trained by deterministic full-batch
// sub-gradient descent with iterate averaging.
RegressorModel train_svr(const RatingDataset& data, const SvrOptions& opts = {},
                         double lambda = kDefaultLambda);

// Objective 0.5 |w|^2 + C sum max(0, |w.x + b - y| - eps).
double svr_objective(std::span<const double> params, const RatingDataset& data,
                     double C, double epsilon);

enum class NnArch { kShort, kLong };

struct NnOptions {
  NnArch arch = NnArch::kShort;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double leaky_slope = 0.01;
  std::uint64_t seed = 0;
};

RegressorModel train_nn(const RatingDataset& data, const NnOptions& opts = {},
                        double lambda = kDefaultLambda);

// Multilayer perceptron with LeakyReLU on hidden layers and a linear output.
// Parameters are stored layer by layer as [W (out x in, row-major), b (out)].
class Mlp {
 public:
  explicit Mlp(NnArch arch, double leaky_slope = 0.01);

  NnArch arch() const { return arch_; }
  std::size_t parameter_count() const;
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

  double forward(std::span<const double> params,
                 std::span<const double, kNumParts> x) const;

  // RMSE loss over a batch; when `grad` is non-empty it receives d loss/d params.
  double rmse_loss(std::span<const double> params,
                   std::span<const RatingSample* const> batch,
                   std::span<double> grad) const;

  // PyTorch-style uniform(+-1/sqrt(fan_in)) initialisation.
  std::vector<double> initial_parameters(std::uint64_t seed) const;

 private:
  NnArch arch_;
  double slope_;
  std::vector<std::size_t> sizes_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

// One Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, const NnOptions& opts);

// Survey scale: Excellent, Good, Fair, Poor, Very Bad -> 1 .. 0.
double likert_score(std::string_view label);

// Per frame: drop ratings more than three population standard deviations from
// the frame mean (one pass), then average the survivors.
std::vector<double> aggregate_ratings(
    std::span<const std::vector<double>> per_frame_ratings);

struct CvResult {
  OpsMethod method;
  double rmse = 0.0;
  std::optional<double> pearson_r;  // undefined for constant series
  std::size_t folds = 0;
  std::vector<double> predictions;  // held-out prediction for every sample
};

struct CvOptions {
  double lambda = kDefaultLambda;
  SvrOptions svr{};
  NnOptions nn{};
};

// Leave-one-source-out cross-validation with pooled held-out metrics.
std::vector<CvResult> cross_validate(const RatingDataset& data,
                                     std::span<const OpsMethod> methods,
                                     const CvOptions& opts = {});

// Trains (or builds, for addition) a model for `method`.
RegressorModel fit_model(OpsMethod method, const RatingDataset& data,
                         const CvOptions& opts);

}  // namespace syncup
