#include "syncup/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace syncup {

namespace {

using nlohmann::json;

std::uint8_t channel(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

double clamp01(double u) {
  if (std::isnan(u)) return 0.0;
  return std::clamp(u, 0.0, 1.0);
}

json color_json(ColorStop c) { return json::array({c.r, c.g, c.b}); }

json edge_json(const OverlayEdge& e) {
  json j;
  j["part"] = body_parts()[e.part].name;
  j["from"] = json::array({e.from.x, e.from.y});
  j["to"] = json::array({e.to.x, e.to.y});
  j["color"] = color_json(e.color);
  j["bpd"] = e.bpd ? json(*e.bpd) : json(nullptr);
  return j;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string ColorStop::hex() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

ColorStop jet_color(double u) {
  u = clamp01(u);
  auto ch = [u](double x0) { return channel(1.5 - std::abs(4.0 * u - x0)); };
  return {ch(3.0), ch(2.0), ch(1.0)};
}

double bpd_to_color_input(double bpd, double lambda) {
  return clamp01(bpd / std::pow(2.0, lambda));
}

ColorStop ramp_color(double u, ColorStop end) {
  u = clamp01(u);
  auto mix = [u](std::uint8_t to) {
    return static_cast<std::uint8_t>(std::lround(255.0 + u * (static_cast<double>(to) - 255.0)));
  };
  return {mix(end.r), mix(end.g), mix(end.b)};
}

ColorStop pose_heatmap_color(double ops_mean) { return ramp_color(1.0 - ops_mean, kPoseRampEnd); }

ColorStop temporal_heatmap_color(double tau_total_ms, double tau_cap_ms) {
  return ramp_color(std::min(1.0, tau_total_ms / tau_cap_ms), kTemporalRampEnd);
}

OverlayFrame overlay_frame(const AnalysisReport& report, std::size_t t) {
  if (t >= report.frames.size()) {
    throw Error(ErrorCode::kNotFound, "frame " + std::to_string(t) + " is not in the report");
  }
  const FrameResult& fr = report.frames[t];
  OverlayFrame out;
  out.frame_index = fr.frame_index;
  out.time_ms = fr.time_ms;
  out.occluded = fr.occluded;
  const auto& parts = body_parts();
  for (std::size_t j = 0; j < report.tracked.dancer_count(); ++j) {
    const TrackedEntry& entry = report.tracked.timelines[j][t];
    OverlayDancer d;
    d.dancer = j;
    d.carried = entry.carried;
    for (std::size_t i = 0; i < kNumParts; ++i) {
      const Keypoint& a = entry.skeleton.keypoints[static_cast<std::size_t>(parts[i].from)];
      const Keypoint& b = entry.skeleton.keypoints[static_cast<std::size_t>(parts[i].to)];
      OverlayEdge e;
      e.part = i;
      e.from = {a.x, a.y};
      e.to = {b.x, b.y};
      if (!fr.bpd.missing[i]) e.bpd = fr.bpd.bpd[i];
      e.color = fr.occluded || !e.bpd
                    ? kOccludedColor
                    : jet_color(bpd_to_color_input(*e.bpd, report.config.lambda));
      d.edges.push_back(e);
    }
    out.dancers.push_back(std::move(d));
  }
  return out;
}

std::optional<std::size_t> find_frame(const AnalysisReport& report, std::int64_t frame_index) {
  const auto it = std::lower_bound(
      report.frames.begin(), report.frames.end(), frame_index,
      [](const FrameResult& f, std::int64_t v) { return f.frame_index < v; });
  if (it == report.frames.end() || it->frame_index != frame_index) return std::nullopt;
  return static_cast<std::size_t>(it - report.frames.begin());
}

std::string overlay_frame_json(const OverlayFrame& frame) {
  json j;
  j["frame"] = frame.frame_index;
  j["time_ms"] = frame.time_ms;
  j["occluded"] = frame.occluded;
  j["dancers"] = json::array();
  for (const auto& d : frame.dancers) {
    json dj;
    dj["dancer"] = d.dancer;
    dj["carried"] = d.carried;
    dj["edges"] = json::array();
    for (const auto& e : d.edges) dj["edges"].push_back(edge_json(e));
    j["dancers"].push_back(std::move(dj));
  }
  return j.dump();
}

std::string export_overlay_stream(const AnalysisReport& report) {
  std::string out;
  json header;
  header["format"] = "syncup-overlay";
  header["version"] = 1;
  header["session_id"] = report.session_id;
  header["fps"] = report.fps;
  header["lambda"] = report.config.lambda;
  header["dancers"] = report.tracked.dancer_count();
  out += header.dump() + "\n";
  for (std::size_t t = 0; t < report.frames.size(); ++t) {
    out += overlay_frame_json(overlay_frame(report, t)) + "\n";
  }
  return out;
}

std::string export_heatmaps(const AnalysisReport& report, HeatmapFormat format) {
  const double cap = report.config.tau_cap_ms;
  if (format == HeatmapFormat::kObjectStream) {
    std::string out;
    json header;
    header["format"] = "syncup-heatmap";
    header["version"] = 1;
    header["session_id"] = report.session_id;
    header["practice_index"] = report.practice_index;
    header["segments"] = report.scores.size();
    header["tau_cap_ms"] = cap;
    out += header.dump() + "\n";
    for (const auto& sc : report.scores) {
      json j;
      j["s"] = sc.s;
      j["start_ms"] = report.segments[sc.s].start_ms;
      j["end_ms"] = report.segments[sc.s].end_ms;
      j["ops_mean"] = sc.ops_mean;
      j["tau_total_ms"] = sc.tau_total_ms;
      j["combined"] = sc.combined;
      j["pose_color"] = color_json(pose_heatmap_color(sc.ops_mean));
      j["temporal_color"] = color_json(temporal_heatmap_color(sc.tau_total_ms, cap));
      j["flags"] = {{"occluded", sc.flags.occluded},
                    {"low_confidence_alignment", sc.flags.low_confidence_alignment},
                    {"missing", sc.flags.missing}};
      out += j.dump() + "\n";
    }
    return out;
  }

  constexpr int kCell = 20, kRow = 40;
  const int width = std::max<int>(1, static_cast<int>(report.scores.size())) * kCell;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << 2 * kRow << "\" viewBox=\"0 0 " << width << ' ' << 2 * kRow << "\">\n";
  const char* rows[] = {"pose", "temporal"};
  for (int row = 0; row < 2; ++row) {
    svg << "  <g class=\"heatmap-" << rows[row] << "\">\n";
    for (const auto& sc : report.scores) {
      const ColorStop c = row == 0 ? pose_heatmap_color(sc.ops_mean)
                                   : temporal_heatmap_color(sc.tau_total_ms, cap);
      svg << "    <rect x=\"" << sc.s * kCell << "\" y=\"" << row * kRow << "\" width=\"" << kCell
          << "\" height=\"" << kRow << "\" fill=\"" << c.hex() << "\" data-s=\"" << sc.s
          << "\" data-ops-mean=\"" << fmt(sc.ops_mean) << "\" data-tau-total=\""
          << fmt(sc.tau_total_ms) << "\" data-combined=\"" << fmt(sc.combined) << "\"";
      if (sc.flags.missing) svg << " data-missing=\"true\"";
      if (sc.flags.occluded) svg << " data-occluded=\"true\"";
      if (sc.flags.low_confidence_alignment) svg << " data-low-confidence=\"true\"";
      svg << "/>\n";
    }
    svg << "  </g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace syncup
