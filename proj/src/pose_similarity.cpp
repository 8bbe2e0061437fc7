#include "syncup/pose_similarity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "syncup/error.hpp"

namespace syncup {

namespace {

constexpr double kRoundoffDistance = 1e-12;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view token, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::kMalformedRecord,
                "bad number for " + what + ": '" + std::string(token) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::array<BodyPart, kNumParts>& body_parts() {
  static const std::array<BodyPart, kNumParts> parts = {{
      {Joint::kNeck, Joint::kNose, "head"},
      {Joint::kNeck, Joint::kRShoulder, "r_shoulder"},
      {Joint::kRShoulder, Joint::kRElbow, "r_upper_arm"},
      {Joint::kRElbow, Joint::kRWrist, "r_forearm"},
      {Joint::kNeck, Joint::kLShoulder, "l_shoulder"},
      {Joint::kLShoulder, Joint::kLElbow, "l_upper_arm"},
      {Joint::kLElbow, Joint::kLWrist, "l_forearm"},
      {Joint::kNeck, Joint::kRHip, "r_torso"},
      {Joint::kRHip, Joint::kRKnee, "r_thigh"},
      {Joint::kRKnee, Joint::kRAnkle, "r_shin"},
      {Joint::kNeck, Joint::kLHip, "l_torso"},
      {Joint::kLHip, Joint::kLKnee, "l_thigh"},
      {Joint::kLKnee, Joint::kLAnkle, "l_shin"},
  }};
  return parts;
}

BodyPartVectors body_part_vectors(const Skeleton& s, double confidence_threshold) {
  BodyPartVectors out;
  const auto& parts = body_parts();
  for (std::size_t i = 0; i < kNumParts; ++i) {
    const Keypoint& a = s[parts[i].from];
    const Keypoint& b = s[parts[i].to];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double norm = std::hypot(dx, dy);
    if (a.confidence < confidence_threshold || b.confidence < confidence_threshold ||
        norm < 1e-6) {
      out.valid[i] = false;
      continue;
    }
    out.vectors[i] = {dx / norm, dy / norm};
    out.valid[i] = true;
  }
  return out;
}

const std::array<double, 10>& lambda_grid() {
  static const std::array<double, 10> grid = [] {
    std::array<double, 10> g{};
    const double lo = std::log(1.0 / 3.0), hi = std::log(3.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      g[k] = std::exp(lo + (hi - lo) * static_cast<double>(k) / 9.0);
    }
    return g;
  }();
  return grid;
}

bool BpdFrame::any_missing() const {
  return std::any_of(missing.begin(), missing.end(), [](bool m) { return m; });
}

bool BpdFrame::all_missing() const {
  return std::all_of(missing.begin(), missing.end(), [](bool m) { return m; });
}

BpdFrame bpd_frame(std::span<const BodyPartVectors> dancers, double lambda,
                   std::int64_t t) {
  if (!(lambda > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
  }
  BpdFrame f;
  f.t = t;
  f.lambda = lambda;
  for (std::size_t i = 0; i < kNumParts; ++i) {
    Vec2 sum{};
    std::size_t count = 0;
    for (const auto& d : dancers) {
      if (!d.valid[i]) continue;
      sum.x += d.vectors[i].x;
      sum.y += d.vectors[i].y;
      ++count;
    }
    f.contributing_dancers[i] = count;
    if (count < 2) {
      f.missing[i] = true;
      continue;
    }
    const Vec2 ref{sum.x / count, sum.y / count};
    double d = 0.0;
    for (const auto& dancer : dancers) {
      if (!dancer.valid[i]) continue;
      d += std::hypot(dancer.vectors[i].x - ref.x, dancer.vectors[i].y - ref.y);
    }
    f.reference[i] = ref;
    f.d_raw[i] = d;
    // Fractional exponents blow up rounding residue; treat it as agreement.
    const double mean = d / static_cast<double>(count);
    f.bpd[i] = mean < kRoundoffDistance ? 0.0 : std::pow(mean, lambda);
  }
  return f;
}

std::optional<std::array<double, kNumParts>> impute_features(const BpdFrame& f) {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < kNumParts; ++i) {
    if (!f.missing[i]) {
      sum += f.bpd[i];
      ++present;
    }
  }
  if (present == 0) return std::nullopt;
  std::array<double, kNumParts> x{};
  const double fill = sum / static_cast<double>(present);
  for (std::size_t i = 0; i < kNumParts; ++i) x[i] = f.missing[i] ? fill : f.bpd[i];
  return x;
}

std::string_view to_string(OpsMethod m) {
  switch (m) {
    case OpsMethod::kAddition: return "addition";
    case OpsMethod::kSvr: return "svr";
    case OpsMethod::kNnShort: return "nn-short";
    case OpsMethod::kNnLong: return "nn-long";
  }
  return "addition";
}

OpsMethod ops_method_from_string(std::string_view s) {
  if (s == "addition") return OpsMethod::kAddition;
  if (s == "svr") return OpsMethod::kSvr;
  if (s == "nn-short" || s == "nn_short") return OpsMethod::kNnShort;
  if (s == "nn-long" || s == "nn_long") return OpsMethod::kNnLong;
  throw Error(ErrorCode::kInvalidArgument, "unknown OPS method '" + std::string(s) + "'");
}

std::string serialize_model(const RegressorModel& m) {
  std::string out = "syncup-model " + std::to_string(kModelFormatVersion) + "\n";
  out += "method " + std::string(to_string(m.method)) + "\n";
  out += "lambda " + format_double(m.lambda) + "\n";
  out += "seed " + std::to_string(m.seed) + "\n";
  out += "epochs " + std::to_string(m.epochs) + "\n";
  out += "parameters " + std::to_string(m.parameters.size()) + "\n";
  for (double p : m.parameters) out += format_double(p) + "\n";
  out += "loss_curve " + std::to_string(m.loss_curve.size()) + "\n";
  for (double l : m.loss_curve) out += format_double(l) + "\n";
  return out;
}

RegressorModel parse_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string key;
  RegressorModel m;
  int version = 0;
  if (!(in >> key >> version) || key != "syncup-model") {
    throw Error(ErrorCode::kMalformedRecord, "not a model file");
  }
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "model format version " + std::to_string(version) + ", expected " +
                    std::to_string(kModelFormatVersion));
  }
  auto read_list = [&](std::vector<double>& dst, const std::string& what) {
    std::size_t n = 0;
    if (!(in >> n)) throw Error(ErrorCode::kMalformedRecord, "missing count for " + what);
    dst.resize(n);
    for (auto& v : dst) {
      std::string tok;
      if (!(in >> tok)) throw Error(ErrorCode::kMalformedRecord, "truncated " + what);
      v = parse_double(tok, what);
    }
  };
  while (in >> key) {
    if (key == "method") {
      std::string v;
      in >> v;
      m.method = ops_method_from_string(v);
    } else if (key == "lambda") {
      std::string v;
      in >> v;
      m.lambda = parse_double(v, "lambda");
    } else if (key == "seed") {
      in >> m.seed;
    } else if (key == "epochs") {
      in >> m.epochs;
    } else if (key == "parameters") {
      read_list(m.parameters, "parameters");
    } else if (key == "loss_curve") {
      read_list(m.loss_curve, "loss_curve");
    } else {
      throw Error(ErrorCode::kMalformedRecord, "unknown model field '" + key + "'");
    }
    if (!in) throw Error(ErrorCode::kMalformedRecord, "bad value for " + key);
  }
  return m;
}

std::vector<std::string> RatingDataset::sources() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.source_id).second) out.push_back(s.source_id);
  }
  return out;
}

RatingDataset parse_rating_csv(std::string_view text) {
  RatingDataset data;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    const std::string_view line = trim(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (!header_seen && trim(cols[0]) == "source_id") {
      header_seen = true;
      continue;
    }
    if (cols.size() != kNumParts + 3) {
      throw Error(ErrorCode::kMalformedRecord,
                  "ratings line " + std::to_string(line_no) + ": expected 16 columns");
    }
    RatingSample s;
    s.source_id = std::string(trim(cols[0]));
    s.frame = static_cast<std::int64_t>(parse_double(trim(cols[1]), "frame"));
    for (std::size_t i = 0; i < kNumParts; ++i) {
      s.bpd[i] = parse_double(trim(cols[2 + i]), "bpd");
    }
    s.rating = parse_double(trim(cols[kNumParts + 2]), "rating");
    if (!(s.rating >= 0.0 && s.rating <= 1.0)) {
      throw Error(ErrorCode::kMalformedRecord,
                  "ratings line " + std::to_string(line_no) + ": rating outside [0, 1]");
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

std::string format_rating_csv(const RatingDataset& data) {
  std::string out = "source_id,frame";
  for (std::size_t i = 1; i <= kNumParts; ++i) out += ",bpd_" + std::to_string(i);
  out += ",rating\n";
  for (const auto& s : data.samples) {
    out += s.source_id + "," + std::to_string(s.frame);
    for (double v : s.bpd) out += "," + format_double(v);
    out += "," + format_double(s.rating) + "\n";
  }
  return out;
}

double likert_score(std::string_view label) {
  if (label == "Excellent") return 1.0;
  if (label == "Good") return 0.75;
  if (label == "Fair") return 0.5;
  if (label == "Poor") return 0.25;
  if (label == "Very Bad") return 0.0;
  throw Error(ErrorCode::kInvalidArgument, "unknown rating '" + std::string(label) + "'");
}

std::vector<double> aggregate_ratings(
    std::span<const std::vector<double>> per_frame_ratings) {
  std::vector<double> labels;
  labels.reserve(per_frame_ratings.size());
  for (std::size_t f = 0; f < per_frame_ratings.size(); ++f) {
    const auto& r = per_frame_ratings[f];
    if (r.size() < 3) {
      throw Error(ErrorCode::kTooFewRatings,
                  "frame " + std::to_string(f) + " has " + std::to_string(r.size()) +
                      " ratings, need at least 3");
    }
    const auto n = static_cast<double>(r.size());
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    double kept_sum = 0.0;
    std::size_t kept = 0;
    for (double v : r) {
      if (std::abs(v - mean) <= 3.0 * sd) {
        kept_sum += v;
        ++kept;
      }
    }
    labels.push_back(kept_sum / static_cast<double>(kept));
  }
  return labels;
}

}  // namespace syncup
