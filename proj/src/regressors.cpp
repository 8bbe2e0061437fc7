#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "syncup/error.hpp"
#include "syncup/metrics.hpp"
#include "syncup/pose_similarity.hpp"

namespace syncup {

namespace {

constexpr std::size_t kMinTrainingSamples = 20;

void require_samples(const RatingDataset& data) {
  if (data.size() < kMinTrainingSamples) {
    throw Error(ErrorCode::kTooFewSamples,
                std::to_string(data.size()) + " samples, need at least 20");
  }
}

double leaky(double z, double slope) { return z > 0.0 ? z : slope * z; }
double leaky_grad(double z, double slope) { return z > 0.0 ? 1.0 : slope; }

std::vector<std::size_t> arch_sizes(NnArch arch) {
  if (arch == NnArch::kShort) return {kNumParts, 1};
  return {kNumParts, 10, 5, 1};
}

NnArch arch_of(OpsMethod m) {
  return m == OpsMethod::kNnLong ? NnArch::kLong : NnArch::kShort;
}

std::size_t expected_parameters(OpsMethod m) {
  switch (m) {
    case OpsMethod::kAddition: return 0;
    case OpsMethod::kSvr: return kNumParts + 1;
    case OpsMethod::kNnShort: return Mlp(NnArch::kShort).parameter_count();
    case OpsMethod::kNnLong: return Mlp(NnArch::kLong).parameter_count();
  }
  return 0;
}

}  // namespace

bool RegressorModel::trained() const {
  return method == OpsMethod::kAddition || parameters.size() == expected_parameters(method);
}

RegressorModel addition_model(double lambda) {
  RegressorModel m;
  m.method = OpsMethod::kAddition;
  m.lambda = lambda;
  return m;
}

double ops_predict(const RegressorModel& model, std::span<const double, kNumParts> bpd) {
  if (!model.trained()) {
    throw Error(ErrorCode::kUntrainedModel,
                std::string(to_string(model.method)) + " model has no trained parameters");
  }
  double y = 0.0;
  switch (model.method) {
    case OpsMethod::kAddition: {
      const double sum = std::accumulate(bpd.begin(), bpd.end(), 0.0);
      y = 1.0 - sum / (static_cast<double>(kNumParts) * std::pow(2.0, model.lambda));
      break;
    }
    case OpsMethod::kSvr: {
      const auto& p = model.parameters;
      y = p[kNumParts];
      for (std::size_t i = 0; i < kNumParts; ++i) y += p[i] * bpd[i];
      break;
    }
    case OpsMethod::kNnShort:
    case OpsMethod::kNnLong:
      y = Mlp(arch_of(model.method)).forward(model.parameters, bpd);
      break;
  }
  if (std::isnan(y)) return 0.0;
  return std::clamp(y, 0.0, 1.0);
}

// ---------------------------------------------------------------------- SVR

double svr_objective(std::span<const double> params, const RatingDataset& data,
                     double C, double epsilon) {
  double reg = 0.0;
  for (std::size_t i = 0; i < kNumParts; ++i) reg += params[i] * params[i];
  double loss = 0.0;
  for (const auto& s : data.samples) {
    double r = params[kNumParts] - s.rating;
    for (std::size_t i = 0; i < kNumParts; ++i) r += params[i] * s.bpd[i];
    loss += std::max(0.0, std::abs(r) - epsilon);
  }
  return 0.5 * reg + C * loss;
}

RegressorModel train_svr(const RatingDataset& data, const SvrOptions& opts, double lambda) {
  require_samples(data);
  if (!(opts.C > 0.0) || opts.epsilon < 0.0 || opts.epochs == 0) {
    throw Error(ErrorCode::kInvalidArgument, "SVR needs C > 0, epsilon >= 0, epochs > 0");
  }
  const std::size_t n = data.size();

  // Optimise in feature-centred coordinates (same w, shifted bias) for
  // better conditioning; the objective is unchanged.
  std::array<double, kNumParts> mu{};
  for (const auto& s : data.samples)
    for (std::size_t i = 0; i < kNumParts; ++i) mu[i] += s.bpd[i];
  for (auto& m : mu) m /= static_cast<double>(n);
  double max_sq_norm = 0.0;
  for (const auto& s : data.samples) {
    double sq = 0.0;
    for (std::size_t i = 0; i < kNumParts; ++i) sq += (s.bpd[i] - mu[i]) * (s.bpd[i] - mu[i]);
    max_sq_norm = std::max(max_sq_norm, sq);
  }
  const double mass = opts.C * static_cast<double>(n);
  const double step0 = 1.0 / (1.0 + mass * (1.0 + max_sq_norm));

  auto to_raw = [&](const std::vector<double>& centred) {
    std::vector<double> raw = centred;
    for (std::size_t i = 0; i < kNumParts; ++i) raw[kNumParts] -= centred[i] * mu[i];
    return raw;
  };

  std::vector<double> theta(kNumParts + 1, 0.0);  // centred coordinates
  double label_mean = 0.0;
  for (const auto& s : data.samples) label_mean += s.rating;
  theta[kNumParts] = label_mean / static_cast<double>(n);

  std::vector<double> avg(kNumParts + 1, 0.0);
  std::size_t averaged = 0;
  const std::size_t average_from = opts.epochs / 2;
  std::vector<double> grad(kNumParts + 1);

  RegressorModel model;
  model.method = OpsMethod::kSvr;
  model.lambda = lambda;
  model.seed = opts.seed;
  model.epochs = opts.epochs;
  model.loss_curve.reserve(opts.epochs);

  std::vector<double> best = to_raw(theta);
  double best_obj = svr_objective(best, data, opts.C, opts.epsilon);

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& s : data.samples) {
      double r = theta[kNumParts] - s.rating;
      for (std::size_t i = 0; i < kNumParts; ++i) r += theta[i] * (s.bpd[i] - mu[i]);
      if (std::abs(r) <= opts.epsilon) continue;
      const double sign = r > 0.0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < kNumParts; ++i) grad[i] += sign * (s.bpd[i] - mu[i]);
      grad[kNumParts] += sign;
    }
    for (std::size_t i = 0; i <= kNumParts; ++i) grad[i] *= opts.C;
    for (std::size_t i = 0; i < kNumParts; ++i) grad[i] += theta[i];

    const double step = step0 / std::sqrt(static_cast<double>(epoch));
    for (std::size_t i = 0; i <= kNumParts; ++i) theta[i] -= step * grad[i];

    if (epoch > average_from) {
      ++averaged;
      for (std::size_t i = 0; i <= kNumParts; ++i) {
        avg[i] += (theta[i] - avg[i]) / static_cast<double>(averaged);
      }
    }
    const auto current = to_raw(averaged > 0 ? avg : theta);
    const double obj = svr_objective(current, data, opts.C, opts.epsilon);
    if (obj < best_obj) {
      best_obj = obj;
      best = current;
    }
    model.loss_curve.push_back(best_obj);
  }
  model.parameters = best;
  return model;
}

// ---------------------------------------------------------------------- MLP

Mlp::Mlp(NnArch arch, double leaky_slope)
    : arch_(arch), slope_(leaky_slope), sizes_(arch_sizes(arch)) {}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += sizes_[l + 1] * (sizes_[l] + 1);
  return n;
}

double Mlp::forward(std::span<const double> params,
                    std::span<const double, kNumParts> x) const {
  std::vector<double> act(x.begin(), x.end()), next;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* W = params.data() + offset;
    const double* b = W + out * in;
    next.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < in; ++i) z += W[o * in + i] * act[i];
      next[o] = (l + 2 < sizes_.size()) ? leaky(z, slope_) : z;
    }
    offset += out * (in + 1);
    act.swap(next);
  }
  return act[0];
}

double Mlp::rmse_loss(std::span<const double> params,
                      std::span<const RatingSample* const> batch,
                      std::span<double> grad) const {
  const std::size_t layers = sizes_.size() - 1;
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;

  // Per-sample forward caches: pre-activations and activations per layer.
  std::vector<std::vector<std::vector<double>>> pre(batch.size()), acts(batch.size());
  std::vector<double> residual(batch.size());
  double sq = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    acts[s].emplace_back(batch[s]->bpd.begin(), batch[s]->bpd.end());
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double* W = params.data() + offset;
      const double* b = W + out * in;
      std::vector<double> z(out), a(out);
      for (std::size_t o = 0; o < out; ++o) {
        double v = b[o];
        for (std::size_t i = 0; i < in; ++i) v += W[o * in + i] * acts[s][l][i];
        z[o] = v;
        a[o] = (l + 1 < layers) ? leaky(v, slope_) : v;
      }
      pre[s].push_back(std::move(z));
      acts[s].push_back(std::move(a));
      offset += out * (in + 1);
    }
    residual[s] = acts[s].back()[0] - batch[s]->rating;
    sq += residual[s] * residual[s];
  }
  const double n = static_cast<double>(batch.size());
  const double loss = std::sqrt(sq / n);
  if (!want_grad || !(loss > 0.0)) return loss;

  // Offsets of each layer's parameter block.
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, off = 0; l < layers; ++l) {
    offsets[l] = off;
    off += sizes_[l + 1] * (sizes_[l] + 1);
  }
  for (std::size_t s = 0; s < batch.size(); ++s) {
    // d loss / d output for this sample.
    std::vector<double> delta{residual[s] / (n * loss)};
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      if (l + 1 < layers) {
        for (std::size_t o = 0; o < out; ++o) delta[o] *= leaky_grad(pre[s][l][o], slope_);
      }
      double* gW = grad.data() + offsets[l];
      double* gb = gW + out * in;
      const double* W = params.data() + offsets[l];
      std::vector<double> prev_delta(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        for (std::size_t i = 0; i < in; ++i) {
          gW[o * in + i] += delta[o] * acts[s][l][i];
          prev_delta[i] += W[o * in + i] * delta[o];
        }
      }
      delta.swap(prev_delta);
    }
  }
  return loss;
}

std::vector<double> Mlp::initial_parameters(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<double> params;
  params.reserve(parameter_count());
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < out * (in + 1); ++k) params.push_back(dist(rng));
  }
  return params;
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const NnOptions& opts) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = opts.beta1 * state.m[i] + (1.0 - opts.beta1) * grad[i];
    state.v[i] = opts.beta2 * state.v[i] + (1.0 - opts.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= opts.learning_rate * m_hat / (std::sqrt(v_hat) + opts.adam_eps);
  }
}

RegressorModel train_nn(const RatingDataset& data, const NnOptions& opts, double lambda) {
  require_samples(data);
  if (opts.batch_size == 0 || opts.epochs == 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch size and epochs must be positive");
  }
  const Mlp net(opts.arch, opts.leaky_slope);
  std::vector<double> params = net.initial_parameters(opts.seed);
  std::vector<double> grad(params.size());
  AdamState adam;

  std::vector<const RatingSample*> all;
  for (const auto& s : data.samples) all.push_back(&s);
  std::vector<const RatingSample*> order = all;
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);

  RegressorModel model;
  model.method = opts.arch == NnArch::kLong ? OpsMethod::kNnLong : OpsMethod::kNnShort;
  model.lambda = lambda;
  model.seed = opts.seed;
  model.epochs = opts.epochs;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t len = std::min(opts.batch_size, order.size() - start);
      std::span<const RatingSample* const> batch(order.data() + start, len);
      net.rmse_loss(params, batch, grad);
      adam_step(params, grad, adam, opts);
    }
    model.loss_curve.push_back(net.rmse_loss(params, all, {}));
  }
  model.parameters = std::move(params);
  return model;
}

// -------------------------------------------------------- cross-validation

RegressorModel fit_model(OpsMethod method, const RatingDataset& data, const CvOptions& opts) {
  switch (method) {
    case OpsMethod::kAddition: return addition_model(opts.lambda);
    case OpsMethod::kSvr: return train_svr(data, opts.svr, opts.lambda);
    case OpsMethod::kNnShort: {
      NnOptions nn = opts.nn;
      nn.arch = NnArch::kShort;
      return train_nn(data, nn, opts.lambda);
    }
    case OpsMethod::kNnLong: {
      NnOptions nn = opts.nn;
      nn.arch = NnArch::kLong;
      return train_nn(data, nn, opts.lambda);
    }
  }
  return addition_model(opts.lambda);
}

std::vector<CvResult> cross_validate(const RatingDataset& data,
                                     std::span<const OpsMethod> methods,
                                     const CvOptions& opts) {
  const auto sources = data.sources();
  if (sources.size() < 2) {
    throw Error(ErrorCode::kSingleSource, "cross-validation needs at least two sources");
  }
  std::vector<double> truth;
  for (const auto& s : data.samples) truth.push_back(s.rating);

  std::vector<CvResult> results;
  for (OpsMethod method : methods) {
    CvResult r;
    r.method = method;
    r.predictions.assign(data.size(), 0.0);
    for (const auto& held_out : sources) {
      RatingDataset train;
      std::vector<std::size_t> test_idx;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.samples[i].source_id == held_out) {
          test_idx.push_back(i);
        } else {
          train.samples.push_back(data.samples[i]);
        }
      }
      const RegressorModel model = fit_model(method, train, opts);
      for (auto i : test_idx) r.predictions[i] = ops_predict(model, data.samples[i].bpd);
      ++r.folds;
    }
    r.rmse = rmse(r.predictions, truth);
    r.pearson_r = pearson(r.predictions, truth);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace syncup
