#include "syncup/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace syncup {

namespace {

template <typename F>
auto run_stage(const char* stage, AnalysisReport& report, F&& body) {
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      report.completed_stage = stage;
    } else {
      auto result = body();
      report.completed_stage = stage;
      return result;
    }
  } catch (const Error& e) {
    throw e.with_stage(stage);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, e.what(), stage);
  }
}

BeatGrid resolve_beats(const RecordingInput& in) {
  if (in.beats) return *in.beats;
  if (in.bpm) return constant_beat_grid(*in.bpm, in.recording.end_ms());
  if (in.audio) {
    const auto env = onset_envelope(in.audio->samples, in.audio->sample_rate);
    return estimate_beats(env);
  }
  throw Error(ErrorCode::kMissingBeats, "no audio, beat file or bpm supplied");
}

// Follower timeline resampled onto the leader's frame clock, with the
// follower's content shifted back by `offset_ms`.
Timeline resample_onto(const Timeline& follower, const Timeline& leader, double offset_ms) {
  Timeline out;
  out.reserve(leader.size());
  const double first = static_cast<double>(follower.front().time_ms);
  const double last = static_cast<double>(follower.back().time_ms);
  for (const auto& le : leader) {
    const double target = static_cast<double>(le.time_ms) + offset_ms;
    const auto it = std::lower_bound(
        follower.begin(), follower.end(), target,
        [](const TrackedEntry& e, double v) { return static_cast<double>(e.time_ms) < v; });
    std::size_t idx;
    if (it == follower.end()) {
      idx = follower.size() - 1;
    } else if (it == follower.begin()) {
      idx = 0;
    } else {
      const auto hi = static_cast<std::size_t>(it - follower.begin());
      idx = (static_cast<double>(follower[hi].time_ms) - target <
             target - static_cast<double>(follower[hi - 1].time_ms))
                ? hi
                : hi - 1;
    }
    TrackedEntry e = follower[idx];
    e.frame_index = le.frame_index;
    e.time_ms = le.time_ms;
    const double half_frame =
        follower.size() > 1 ? 0.5 * (last - first) / static_cast<double>(follower.size() - 1)
                            : 0.0;
    if (target < first - half_frame || target > last + half_frame) e.carried = true;
    out.push_back(std::move(e));
  }
  return out;
}

RegressorModel resolve_model(const AnalysisConfig& cfg) {
  if (cfg.method == OpsMethod::kAddition) return addition_model(cfg.lambda);
  if (!cfg.model || cfg.model->method != cfg.method || !cfg.model->trained()) {
    throw Error(ErrorCode::kUntrainedModel,
                "method " + std::string(to_string(cfg.method)) + " needs a trained model");
  }
  if (std::abs(cfg.model->lambda - cfg.lambda) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "model was trained for lambda " + std::to_string(cfg.model->lambda) +
                    ", analysis uses " + std::to_string(cfg.lambda));
  }
  return *cfg.model;
}

void validate_inputs(const SessionInputs& inputs) {
  if (inputs.recordings.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "session has no recordings");
  }
  if (inputs.mode == Mode::kGroup) {
    if (inputs.recordings.size() != 1) {
      throw Error(ErrorCode::kInvalidArgument, "group mode takes exactly one recording");
    }
    return;
  }
  std::size_t leaders = 0, followers = 0;
  for (const auto& r : inputs.recordings) {
    leaders += r.recording.role == Role::kLeader;
    followers += r.recording.role == Role::kFollower;
  }
  if (leaders != 1 || followers < 1 || leaders + followers != inputs.recordings.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "individual mode needs one leader and at least one follower recording");
  }
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::kGroup ? "group" : "individual"; }

Mode mode_from_string(std::string_view s) {
  if (s == "group") return Mode::kGroup;
  if (s == "individual") return Mode::kIndividual;
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + std::string(s) + "'");
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kPending: return "pending";
    case SessionStatus::kAnalyzing: return "analyzing";
    case SessionStatus::kDone: return "done";
    case SessionStatus::kFailed: return "failed";
  }
  return "pending";
}

SessionStatus status_from_string(std::string_view s) {
  if (s == "pending") return SessionStatus::kPending;
  if (s == "analyzing") return SessionStatus::kAnalyzing;
  if (s == "done") return SessionStatus::kDone;
  if (s == "failed") return SessionStatus::kFailed;
  throw Error(ErrorCode::kInvalidArgument, "unknown status '" + std::string(s) + "'");
}

double combined_score(double ops_mean, double tau_total_ms, const AnalysisConfig& cfg) {
  const double timing = 1.0 - std::min(1.0, tau_total_ms / cfg.tau_cap_ms);
  return cfg.weight_pose * ops_mean + cfg.weight_time * timing;
}

namespace {

void run_pipeline(const SessionInputs& inputs, const AnalysisConfig& cfg,
                  AnalysisReport& report) {
  run_stage("ingest", report, [&] {
    validate_inputs(inputs);
    if (std::abs(cfg.weight_pose + cfg.weight_time - 1.0) > 1e-9 || cfg.weight_pose < 0.0 ||
        cfg.weight_time < 0.0 || !(cfg.tau_cap_ms > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "score weights must be non-negative and sum to 1; tau cap positive");
    }
  });

  const auto leader_input = std::find_if(
      inputs.recordings.begin(), inputs.recordings.end(), [&](const RecordingInput& r) {
        return inputs.mode == Mode::kGroup || r.recording.role == Role::kLeader;
      });
  report.fps = leader_input->recording.fps;

  std::size_t leader = cfg.leader;
  run_stage("tracking", report, [&] {
    if (inputs.mode == Mode::kGroup) {
      report.tracked = track(leader_input->recording);
      return;
    }
    const TrackedSequence lead = track(leader_input->recording);
    report.tracked.fps = lead.fps;
    report.tracked.timelines.push_back(lead.timelines.front());
    leader = 0;
    for (const auto& in : inputs.recordings) {
      if (in.recording.role != Role::kFollower) continue;
      double offset = 0.0;
      if (leader_input->audio && in.audio) {
        const auto env_a =
            onset_envelope(leader_input->audio->samples, leader_input->audio->sample_rate);
        const auto env_b = onset_envelope(in.audio->samples, in.audio->sample_rate);
        offset = align_recordings(env_a, env_b);
      }
      report.follower_offsets_ms.push_back(offset);
      const TrackedSequence fol = track(in.recording);
      report.tracked.timelines.push_back(
          resample_onto(fol.timelines.front(), lead.timelines.front(), offset));
    }
  });

  run_stage("segmentation", report, [&] {
    report.beats = resolve_beats(*leader_input);
    report.segments = build_segments(report.beats, leader_input->recording);
  });

  run_stage("pose_similarity", report, [&] {
    const RegressorModel model = resolve_model(cfg);
    const std::size_t frames = report.tracked.frame_count();
    report.frames.resize(frames);
    std::vector<BodyPartVectors> vectors(report.tracked.dancer_count());
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t j = 0; j < vectors.size(); ++j) {
        vectors[j] = body_part_vectors(report.tracked.timelines[j][t].skeleton,
                                       cfg.confidence_threshold);
      }
      const auto& ref = report.tracked.timelines.front()[t];
      FrameResult& fr = report.frames[t];
      fr.frame_index = ref.frame_index;
      fr.time_ms = ref.time_ms;
      fr.bpd = bpd_frame(vectors, cfg.lambda, ref.frame_index);
      fr.occluded = fr.bpd.any_missing();
      if (const auto x = impute_features(fr.bpd)) fr.ops = ops_predict(model, *x);
    }
  });

  run_stage("temporal_alignment", report, [&] {
    if (report.tracked.dancer_count() < 2 || report.segments.size() < 2) return;
    if (leader >= report.tracked.dancer_count()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "leader " + std::to_string(leader) + " does not exist");
    }
    std::vector<ImpactEnvelope> envelopes;
    for (const auto& tl : report.tracked.timelines) {
      envelopes.push_back(dancer_envelope(tl, cfg.n_bins, cfg.confidence_threshold));
    }
    ShiftOptions opts;
    opts.max_shift_ms = cfg.max_shift_ms;
    for (std::size_t s = 0; s < report.segments.size(); ++s) {
      report.alignments.push_back(alignment_for_segment(envelopes, leader, report.segments, s,
                                                        report.fps, opts));
    }
  });

  run_stage("scoring", report, [&] {
    for (const auto& seg : report.segments) {
      SegmentScore sc;
      sc.s = seg.index;
      double sum = 0.0;
      std::size_t valid = 0, occluded = 0;
      for (std::size_t t = seg.first_frame; t <= seg.last_frame; ++t) {
        const auto& fr = report.frames[t];
        if (fr.occluded) ++occluded;
        if (fr.ops) {
          sum += *fr.ops;
          ++valid;
        }
      }
      sc.ops_mean = valid ? sum / static_cast<double>(valid) : 0.0;
      sc.flags.occluded = static_cast<double>(occluded) >=
                          cfg.occluded_fraction * static_cast<double>(seg.frame_count());
      bool timing_missing = true;
      if (seg.index < report.alignments.size()) {
        const auto& al = report.alignments[seg.index];
        sc.tau_total_ms = al.tau_total_ms;
        sc.flags.low_confidence_alignment = al.low_confidence();
        timing_missing = al.all_missing();
      }
      sc.flags.missing = valid == 0 || timing_missing;
      sc.combined = combined_score(sc.ops_mean, sc.tau_total_ms, cfg);
      report.scores.push_back(sc);
    }
  });
}

}  // namespace

AnalysisOutcome try_analyze_session(const SessionInputs& inputs, const AnalysisConfig& cfg,
                                    std::string session_id, int practice_index) {
  AnalysisOutcome out;
  out.report.session_id = std::move(session_id);
  out.report.mode = inputs.mode;
  out.report.practice_index = practice_index;
  out.report.config = cfg;
  try {
    run_pipeline(inputs, cfg, out.report);
  } catch (const Error& e) {
    out.error = e;
  }
  return out;
}

AnalysisReport analyze_session(const SessionInputs& inputs, const AnalysisConfig& cfg,
                               std::string session_id, int practice_index) {
  auto out = try_analyze_session(inputs, cfg, std::move(session_id), practice_index);
  if (out.error) throw *out.error;
  return std::move(out.report);
}

SpotlightList spotlight(const AnalysisReport& report) {
  SpotlightList list;
  list.entries = report.scores;
  std::stable_sort(list.entries.begin(), list.entries.end(),
                   [](const SegmentScore& a, const SegmentScore& b) {
                     if (a.flags.missing != b.flags.missing) return !a.flags.missing;
                     if (a.combined != b.combined) return a.combined < b.combined;
                     return a.s < b.s;
                   });
  return list;
}

ComparisonMatrix compare_practices(std::span<const AnalysisReport> reports) {
  if (reports.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "comparison needs at least two practices");
  }
  std::size_t lo = reports.front().scores.size(), hi = lo;
  for (const auto& r : reports) {
    lo = std::min(lo, r.scores.size());
    hi = std::max(hi, r.scores.size());
  }
  if (hi - lo > 1) {
    throw Error(ErrorCode::kSegmentCountMismatch,
                "segment counts range from " + std::to_string(lo) + " to " +
                    std::to_string(hi));
  }
  ComparisonMatrix m;
  m.segment_count = hi;
  for (const auto& r : reports) {
    m.session_ids.push_back(r.session_id);
    m.practice_indices.push_back(r.practice_index);
    std::vector<std::optional<double>> ops(hi), tau(hi);
    for (const auto& sc : r.scores) {
      if (sc.s >= hi) continue;
      ops[sc.s] = sc.ops_mean;
      tau[sc.s] = sc.tau_total_ms;
    }
    m.ops_mean.push_back(std::move(ops));
    m.tau_total_ms.push_back(std::move(tau));
  }
  return m;
}

}  // namespace syncup
