#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "syncup/pose_similarity.hpp"
#include "syncup/scoring.hpp"

namespace syncup {

struct ColorStop {
  std::uint8_t r = 0, g = 0, b = 0;

  bool operator==(const ColorStop&) const = default;
  std::string hex() const;  // "#rrggbb"
};

inline constexpr ColorStop kOccludedColor{128, 128, 128};
inline constexpr ColorStop kPoseRampEnd{139, 0, 0};
inline constexpr ColorStop kTemporalRampEnd{0, 0, 139};

// Piecewise-linear JET; u outside [0,1] is clamped.
ColorStop jet_color(double u);

// bpd normalised by its maximum 2^lambda, clamped to [0,1].
double bpd_to_color_input(double bpd, double lambda);

// White at 0, `end` at 1.
ColorStop ramp_color(double u, ColorStop end);
ColorStop pose_heatmap_color(double ops_mean);
ColorStop temporal_heatmap_color(double tau_total_ms, double tau_cap_ms);

struct OverlayEdge {
  std::size_t part = 0;
  Vec2 from, to;
  ColorStop color;
  std::optional<double> bpd;  // nullopt when the part is missing
};

struct OverlayDancer {
  std::size_t dancer = 0;
  bool carried = false;
  std::vector<OverlayEdge> edges;  // one per body part
};

struct OverlayFrame {
  std::int64_t frame_index = 0;
  std::int64_t time_ms = 0;
  bool occluded = false;
  std::vector<OverlayDancer> dancers;
};

// `t` indexes report.frames. Occluded frames get every edge in kOccludedColor.
OverlayFrame overlay_frame(const AnalysisReport& report, std::size_t t);

// Position in report.frames of the frame with the given frame index.
std::optional<std::size_t> find_frame(const AnalysisReport& report, std::int64_t frame_index);

std::string overlay_frame_json(const OverlayFrame& frame);

// Header line followed by one object per frame.
std::string export_overlay_stream(const AnalysisReport& report);

enum class HeatmapFormat { kObjectStream, kSvg };

// Pose row (white to dark red by 1 - ops_mean) and temporal row (white to
// dark blue by min(1, tau_total / cap)), one cell per segment.
std::string export_heatmaps(const AnalysisReport& report, HeatmapFormat format);

}  // namespace syncup
