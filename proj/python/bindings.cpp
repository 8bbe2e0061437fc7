#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "syncup/audio_beats.hpp"
#include "syncup/eval_harness.hpp"
#include "syncup/metrics.hpp"
#include "syncup/pose_similarity.hpp"
#include "syncup/render.hpp"
#include "syncup/scoring.hpp"
#include "syncup/session_store.hpp"
#include "syncup/tracker.hpp"

namespace py = pybind11;
using namespace syncup;

namespace {

using KeypointList = std::vector<std::array<double, 3>>;

Skeleton to_skeleton(const KeypointList& kps) {
  if (kps.size() != kNumKeypoints) {
    throw Error(ErrorCode::kBadKeypointCount,
                "expected 18 keypoints, got " + std::to_string(kps.size()));
  }
  Skeleton s;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) s.keypoints[i] = {kps[i][0], kps[i][1], kps[i][2]};
  return s;
}

KeypointList from_skeleton(const Skeleton& s) {
  KeypointList out;
  for (const auto& k : s.keypoints) out.push_back({k.x, k.y, k.confidence});
  return out;
}

std::vector<Skeleton> to_skeletons(const std::vector<KeypointList>& list) {
  std::vector<Skeleton> out;
  for (const auto& kps : list) out.push_back(to_skeleton(kps));
  return out;
}

py::tuple color_tuple(ColorStop c) { return py::make_tuple(c.r, c.g, c.b); }

OnsetEnvelope to_envelope(double hop_ms, const std::vector<double>& values) {
  return {hop_ms, values};
}

SessionInputs group_inputs(const std::string& poses, std::optional<std::vector<double>> beats,
                           std::optional<double> bpm, std::optional<double> fps) {
  SessionInputs inputs;
  inputs.mode = Mode::kGroup;
  RecordingInput in;
  in.recording = parse_pose_stream(poses, fps);
  if (beats) {
    BeatGrid grid;
    grid.beat_times_ms = *beats;
    in.beats = grid;
  }
  in.bpm = bpm;
  inputs.recordings.push_back(std::move(in));
  return inputs;
}

}  // namespace

PYBIND11_MODULE(_syncup, m) {
  m.doc() = "Dance synchronization engine: tracking, pose similarity, alignment, scoring.";

  static PyObject* error_type = py::exception<Error>(m, "SyncupError").release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::handle(error_type)(e.what());
      err.attr("code") = std::string(to_string(e.code()));
      err.attr("stage") = e.stage();
      err.attr("detail") = e.detail();
      PyErr_SetObject(error_type, err.ptr());
    }
  });

  m.attr("DEFAULT_LAMBDA") = kDefaultLambda;
  m.attr("NUM_PARTS") = kNumParts;

  m.def("body_part_names", [] {
    std::vector<std::string> names;
    for (const auto& p : body_parts()) names.emplace_back(p.name);
    return names;
  });

  m.def("validate_pose_stream", [](const std::string& text, std::optional<double> fps) {
    const Recording r = parse_pose_stream(text, fps);
    const ValidationReport v = validate_recording(r);
    py::dict d;
    d["frames"] = r.frames.size();
    d["fps"] = r.fps;
    d["modal_count"] = v.modal_count;
    std::vector<std::int64_t> low, count, timing;
    for (const auto& l : v.low_confidence) low.push_back(l.frame_index);
    for (const auto& c : v.count_anomalies) count.push_back(c.frame_index);
    for (const auto& t : v.timing_anomalies) timing.push_back(t.frame_index);
    d["low_confidence_frames"] = low;
    d["count_anomaly_frames"] = count;
    d["timing_anomaly_frames"] = timing;
    return d;
  }, py::arg("text"), py::arg("fps") = py::none());

  m.def("skeleton_distance", [](const KeypointList& a, const KeypointList& b) {
    return skeleton_distance(to_skeleton(a), to_skeleton(b));
  });

  m.def("assign_frame", [](const std::vector<KeypointList>& prev,
                           const std::vector<KeypointList>& next) {
    const auto a = to_skeletons(prev), b = to_skeletons(next);
    const FrameAssignment fa = assign_frame(a, b);
    return py::make_tuple(fa.next_for_identity, fa.discarded, fa.cost);
  }, py::arg("prev"), py::arg("next"));

  m.def("track", [](const std::string& text, std::optional<double> fps) {
    const TrackedSequence seq = track(parse_pose_stream(text, fps));
    py::list timelines;
    for (const auto& tl : seq.timelines) {
      py::list entries;
      for (const auto& e : tl) {
        py::dict d;
        d["frame"] = e.frame_index;
        d["time_ms"] = e.time_ms;
        d["carried"] = e.carried;
        d["keypoints"] = from_skeleton(e.skeleton);
        entries.append(d);
      }
      timelines.append(entries);
    }
    return timelines;
  }, py::arg("text"), py::arg("fps") = py::none());

  m.def("bpd_frame", [](const std::vector<KeypointList>& dancers, double lambda,
                        double confidence_threshold) {
    std::vector<BodyPartVectors> vecs;
    for (const auto& kps : dancers) vecs.push_back(body_part_vectors(to_skeleton(kps), confidence_threshold));
    const BpdFrame f = bpd_frame(vecs, lambda);
    std::vector<std::optional<double>> values;
    for (std::size_t i = 0; i < kNumParts; ++i) {
      values.push_back(f.missing[i] ? std::nullopt : std::optional<double>(f.bpd[i]));
    }
    return values;
  }, py::arg("dancers"), py::arg("lambda_") = kDefaultLambda,
     py::arg("confidence_threshold") = kDefaultConfidenceThreshold);

  m.def("ops_addition", [](const std::array<double, kNumParts>& bpd, double lambda) {
    return ops_predict(addition_model(lambda), bpd);
  }, py::arg("bpd"), py::arg("lambda_") = kDefaultLambda);

  m.def("onset_envelope", [](py::array_t<float, py::array::c_style | py::array::forcecast> audio,
                             double sample_rate) {
    const OnsetEnvelope env =
        onset_envelope(std::span<const float>(audio.data(), static_cast<std::size_t>(audio.size())),
                       sample_rate);
    return py::make_tuple(env.hop_ms, env.values);
  });

  m.def("estimate_beats", [](double hop_ms, const std::vector<double>& values) {
    const BeatGrid g = estimate_beats(to_envelope(hop_ms, values));
    return py::make_tuple(g.bpm, g.beat_times_ms);
  });

  m.def("align_recordings", [](double hop_ms, const std::vector<double>& a,
                               const std::vector<double>& b) {
    return align_recordings(to_envelope(hop_ms, a), to_envelope(hop_ms, b));
  });

  m.def("jet_color", [](double u) { return color_tuple(jet_color(u)); });
  m.def("bpd_to_color_input", &bpd_to_color_input, py::arg("bpd"), py::arg("lambda_"));

  m.def("train_model", [](const std::string& csv, const std::string& method, double lambda,
                          std::uint64_t seed) {
    CvOptions opts;
    opts.lambda = lambda;
    opts.svr.seed = opts.nn.seed = seed;
    return serialize_model(fit_model(ops_method_from_string(method), parse_rating_csv(csv), opts));
  }, py::arg("csv"), py::arg("method") = "svr", py::arg("lambda_") = kDefaultLambda,
     py::arg("seed") = 0);

  m.def("cross_validate", [](const std::string& csv, const std::vector<std::string>& methods,
                             double lambda, std::uint64_t seed) {
    std::vector<OpsMethod> ms;
    for (const auto& name : methods) ms.push_back(ops_method_from_string(name));
    CvOptions opts;
    opts.lambda = lambda;
    opts.svr.seed = opts.nn.seed = seed;
    py::dict out;
    for (const auto& r : cross_validate(parse_rating_csv(csv), ms, opts)) {
      py::dict d;
      d["rmse"] = r.rmse;
      d["pearson_r"] = r.pearson_r;
      d["folds"] = r.folds;
      out[py::str(std::string(to_string(r.method)))] = d;
    }
    return out;
  }, py::arg("csv"), py::arg("methods"), py::arg("lambda_") = kDefaultLambda,
     py::arg("seed") = 0);

  m.def("evaluate_metrics", [](const std::vector<double>& pred, const std::vector<double>& truth) {
    const MetricSummary s = evaluate_metrics(pred, truth);
    return py::make_tuple(s.rmse, s.pearson_r, s.p_value);
  });

  m.def("synthetic_session", [](const std::string& spec_text, std::uint64_t seed) {
    const SyntheticSession s = generate(parse_synthetic_spec(spec_text), seed);
    py::dict d;
    d["poses"] = serialize_pose_stream(s.group);
    d["beats"] = s.truth.beats.beat_times_ms;
    d["time_shift_ms"] = s.truth.time_shift_ms;
    d["identity"] = s.truth.identity;
    std::vector<std::string> individual;
    for (const auto& r : s.individual) individual.push_back(serialize_pose_stream(r));
    d["individual"] = individual;
    return d;
  }, py::arg("spec"), py::arg("seed") = 0);

  m.def("synthetic_ratings_csv", [](std::size_t samples, std::size_t sources, std::uint64_t seed,
                                    bool addition_labels, double lambda) {
    return format_rating_csv(synthetic_rating_dataset(
        samples, sources, seed, addition_labels ? RatingLabel::kAddition : RatingLabel::kLinear,
        lambda));
  }, py::arg("samples"), py::arg("sources"), py::arg("seed") = 0,
     py::arg("addition_labels") = false, py::arg("lambda_") = kDefaultLambda);

  m.def("analyze_group", [](const std::string& poses, const std::string& config_json,
                            std::optional<std::vector<double>> beats, std::optional<double> bpm,
                            std::optional<double> fps) {
    const AnalysisConfig cfg = config_from_json(nlohmann::json::parse(config_json));
    const AnalysisReport report = analyze_session(group_inputs(poses, beats, bpm, fps), cfg);
    return report_to_json(report, false).dump();
  }, py::arg("poses"), py::arg("config_json") = "{}", py::arg("beats") = py::none(),
     py::arg("bpm") = py::none(), py::arg("fps") = py::none());

  m.def("export_heatmap_svg", [](const std::string& report_json) {
    return export_heatmaps(report_from_json(nlohmann::json::parse(report_json)), HeatmapFormat::kSvg);
  });
}
