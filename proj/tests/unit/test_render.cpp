#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "syncup/eval_harness.hpp"
#include "syncup/render.hpp"
#include "syncup/scoring.hpp"

using namespace syncup;

namespace {

const AnalysisReport& sample_report() {
  static const AnalysisReport report = [] {
    SyntheticSpec spec;
    spec.dancer_count = 2;
    spec.duration_ms = 12000;
    spec.perturbations = {{}, {0, 0, 0.2}};
    const auto syn = generate(spec, 7);
    SessionInputs in;
    RecordingInput r;
    r.recording = syn.group;
    r.beats = syn.truth.beats;
    in.recordings.push_back(r);
    AnalysisConfig cfg;
    cfg.method = OpsMethod::kAddition;
    return analyze_session(in, cfg, "render-test");
  }();
  return report;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Jet, Goldens) {
  EXPECT_EQ(jet_color(0.0), (ColorStop{0, 0, 128}));
  EXPECT_EQ(jet_color(0.5), (ColorStop{128, 255, 128}));
  EXPECT_EQ(jet_color(1.0), (ColorStop{128, 0, 0}));
  EXPECT_EQ(jet_color(0.25), (ColorStop{0, 128, 255}));
  EXPECT_EQ(jet_color(0.75), (ColorStop{255, 128, 0}));
  EXPECT_EQ(jet_color(0.5).hex(), "#80ff80");
}

TEST(Jet, ClampsAndPeaksInOrder) {
  EXPECT_EQ(jet_color(-3.0), jet_color(0.0));
  EXPECT_EQ(jet_color(7.0), jet_color(1.0));
  EXPECT_EQ(jet_color(std::nan("")), jet_color(0.0));
  double arg_r = 0, arg_g = 0, arg_b = 0;
  int best_r = -1, best_g = -1, best_b = -1;
  for (int k = 0; k <= 1000; ++k) {
    const double u = k / 1000.0;
    const auto c = jet_color(u);
    if (c.r > best_r) best_r = c.r, arg_r = u;
    if (c.g > best_g) best_g = c.g, arg_g = u;
    if (c.b > best_b) best_b = c.b, arg_b = u;
  }
  EXPECT_LT(arg_b, arg_g);
  EXPECT_LT(arg_g, arg_r);
}

TEST(ColorInput, NormalisedByLambda) {
  EXPECT_DOUBLE_EQ(bpd_to_color_input(0.0, 0.885), 0.0);
  EXPECT_DOUBLE_EQ(bpd_to_color_input(1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(bpd_to_color_input(std::pow(2.0, 0.885), 0.885), 1.0);
  EXPECT_DOUBLE_EQ(bpd_to_color_input(50.0, 0.885), 1.0);
}

TEST(Heatmap, RampEnds) {
  EXPECT_EQ(pose_heatmap_color(1.0), (ColorStop{255, 255, 255}));
  EXPECT_EQ(pose_heatmap_color(0.0), kPoseRampEnd);
  EXPECT_EQ(temporal_heatmap_color(0.0, 500), (ColorStop{255, 255, 255}));
  EXPECT_EQ(temporal_heatmap_color(900.0, 500), kTemporalRampEnd);
  EXPECT_EQ(temporal_heatmap_color(250.0, 500), (ColorStop{128, 128, 197}));
}

TEST(Overlay, OccludedFramesAreGray) {
  const auto& report = sample_report();
  std::size_t occluded = 0, clear = 0;
  for (std::size_t t = 0; t < report.frames.size(); ++t) {
    const auto f = overlay_frame(report, t);
    ASSERT_EQ(f.dancers.size(), 2u);
    for (const auto& d : f.dancers) {
      ASSERT_EQ(d.edges.size(), kNumParts);
      for (const auto& e : d.edges) {
        if (f.occluded || !e.bpd) {
          EXPECT_EQ(e.color, kOccludedColor);
        } else {
          EXPECT_EQ(e.color, jet_color(bpd_to_color_input(*e.bpd, report.config.lambda)));
        }
      }
    }
    (f.occluded ? occluded : clear) += 1;
  }
  EXPECT_GT(occluded, 0u);
  EXPECT_GT(clear, 0u);
  EXPECT_THROW(overlay_frame(report, report.frames.size()), Error);
}

TEST(Overlay, StreamHasHeaderAndOneLinePerFrame) {
  const auto& report = sample_report();
  const auto ls = lines(export_overlay_stream(report));
  ASSERT_EQ(ls.size(), report.frames.size() + 1);
  const auto header = nlohmann::json::parse(ls[0]);
  EXPECT_EQ(header["format"], "syncup-overlay");
  EXPECT_EQ(header["version"], 1);
  const auto f5 = nlohmann::json::parse(ls[6]);
  EXPECT_EQ(f5["frame"], report.frames[5].frame_index);
  EXPECT_EQ(f5["dancers"].size(), 2u);
  EXPECT_EQ(f5["dancers"][0]["edges"].size(), kNumParts);
  EXPECT_EQ(find_frame(report, report.frames[5].frame_index), 5u);
  EXPECT_FALSE(find_frame(report, -4));
}

TEST(HeatmapExport, SvgCellsCarryScores) {
  const auto& report = sample_report();
  const auto svg = export_heatmaps(report, HeatmapFormat::kSvg);
  EXPECT_NE(svg.find("<g class=\"heatmap-pose\">"), std::string::npos);
  EXPECT_NE(svg.find("<g class=\"heatmap-temporal\">"), std::string::npos);
  std::size_t rects = 0;
  for (auto pos = svg.find("<rect"); pos != std::string::npos; pos = svg.find("<rect", pos + 1)) ++rects;
  EXPECT_EQ(rects, 2 * report.scores.size());
  const auto& sc = report.scores[1];
  EXPECT_NE(svg.find("fill=\"" + pose_heatmap_color(sc.ops_mean).hex() + "\" data-s=\"1\""),
            std::string::npos);
  EXPECT_NE(svg.find("data-combined="), std::string::npos);
}

TEST(HeatmapExport, ObjectStream) {
  const auto& report = sample_report();
  const auto ls = lines(export_heatmaps(report, HeatmapFormat::kObjectStream));
  ASSERT_EQ(ls.size(), report.scores.size() + 1);
  EXPECT_EQ(nlohmann::json::parse(ls[0])["format"], "syncup-heatmap");
  const auto seg = nlohmann::json::parse(ls[2]);
  EXPECT_EQ(seg["s"], 1);
  EXPECT_DOUBLE_EQ(seg["ops_mean"].get<double>(), report.scores[1].ops_mean);
  const auto c = pose_heatmap_color(report.scores[1].ops_mean);
  EXPECT_EQ(seg["pose_color"], nlohmann::json::array({c.r, c.g, c.b}));
}
