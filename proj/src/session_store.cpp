#include "syncup/session_store.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

namespace syncup {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json keypoints_json(const Skeleton& s) {
  json arr = json::array();
  for (const auto& k : s.keypoints) arr.push_back(json::array({k.x, k.y, k.confidence}));
  return arr;
}

Skeleton skeleton_from(const json& arr) {
  Skeleton s;
  if (arr.size() != kNumKeypoints) {
    throw Error(ErrorCode::kMalformedRecord, "stored skeleton has wrong keypoint count");
  }
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    s.keypoints[i] = {arr[i][0].get<double>(), arr[i][1].get<double>(),
                      arr[i][2].get<double>()};
  }
  return s;
}

json bpd_json(const BpdFrame& f) {
  json j;
  j["t"] = f.t;
  j["lambda"] = f.lambda;
  json values = json::array(), raw = json::array(), ref = json::array(),
       count = json::array();
  for (std::size_t i = 0; i < kNumParts; ++i) {
    values.push_back(f.missing[i] ? json(nullptr) : json(f.bpd[i]));
    raw.push_back(f.d_raw[i]);
    ref.push_back(json::array({f.reference[i].x, f.reference[i].y}));
    count.push_back(f.contributing_dancers[i]);
  }
  j["values"] = std::move(values);
  j["d_raw"] = std::move(raw);
  j["reference"] = std::move(ref);
  j["contributing_dancers"] = std::move(count);
  return j;
}

BpdFrame bpd_from(const json& j) {
  BpdFrame f;
  f.t = j.at("t").get<std::int64_t>();
  f.lambda = j.at("lambda").get<double>();
  for (std::size_t i = 0; i < kNumParts; ++i) {
    const json& v = j.at("values")[i];
    f.missing[i] = v.is_null();
    f.bpd[i] = v.is_null() ? 0.0 : v.get<double>();
    f.d_raw[i] = j.at("d_raw")[i].get<double>();
    f.reference[i] = {j.at("reference")[i][0].get<double>(),
                      j.at("reference")[i][1].get<double>()};
    f.contributing_dancers[i] = j.at("contributing_dancers")[i].get<std::size_t>();
  }
  return f;
}

void check_version(const json& j, int expected, const char* what) {
  const int found = j.value("format_version", 0);
  if (found != expected) {
    throw Error(ErrorCode::kVersionMismatch, std::string(what) + " format version " +
                                                 std::to_string(found) + ", expected " +
                                                 std::to_string(expected));
  }
}

void check_id(const std::string& id) {
  const bool ok = !id.empty() && id.size() <= 128 &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
                  });
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "invalid id '" + id + "'");
}

}  // namespace

json config_to_json(const AnalysisConfig& cfg) {
  json j;
  j["lambda"] = cfg.lambda;
  j["method"] = to_string(cfg.method);
  j["model"] = cfg.model ? json(serialize_model(*cfg.model)) : json(nullptr);
  j["leader"] = cfg.leader;
  j["n_bins"] = cfg.n_bins;
  j["max_shift_ms"] = opt(cfg.max_shift_ms);
  j["weight_pose"] = cfg.weight_pose;
  j["weight_time"] = cfg.weight_time;
  j["tau_cap_ms"] = cfg.tau_cap_ms;
  j["confidence_threshold"] = cfg.confidence_threshold;
  j["occluded_fraction"] = cfg.occluded_fraction;
  j["seed"] = cfg.seed;
  return j;
}

AnalysisConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be an object");
  AnalysisConfig cfg;
  try {
    cfg.lambda = j.value("lambda", cfg.lambda);
    if (j.contains("method")) cfg.method = ops_method_from_string(j.at("method").get<std::string>());
    if (j.contains("model") && !j.at("model").is_null()) {
      cfg.model = parse_model(j.at("model").get<std::string>());
    }
    cfg.leader = j.value("leader", cfg.leader);
    cfg.n_bins = j.value("n_bins", cfg.n_bins);
    cfg.max_shift_ms = opt_double(j, "max_shift_ms");
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      cfg.weight_pose = w.value("pose", cfg.weight_pose);
      cfg.weight_time = w.value("time", cfg.weight_time);
    }
    cfg.weight_pose = j.value("weight_pose", cfg.weight_pose);
    cfg.weight_time = j.value("weight_time", cfg.weight_time);
    cfg.tau_cap_ms = j.value("tau_cap_ms", cfg.tau_cap_ms);
    cfg.confidence_threshold = j.value("confidence_threshold", cfg.confidence_threshold);
    cfg.occluded_fraction = j.value("occluded_fraction", cfg.occluded_fraction);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad config: ") + e.what());
  }
  if (!(cfg.lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
  return cfg;
}

json session_to_json(const Session& s) {
  json j;
  j["format_version"] = kSessionFormatVersion;
  j["id"] = s.id;
  j["mode"] = to_string(s.mode);
  j["practice_index"] = s.practice_index;
  j["status"] = to_string(s.status);
  j["recordings"] = json::array();
  for (const auto& r : s.recordings) {
    j["recordings"].push_back({{"id", r.id}, {"role", to_string(r.role)}});
  }
  return j;
}

Session session_from_json(const json& j) {
  check_version(j, kSessionFormatVersion, "session");
  Session s;
  s.id = j.at("id").get<std::string>();
  s.mode = mode_from_string(j.at("mode").get<std::string>());
  s.practice_index = j.at("practice_index").get<int>();
  s.status = status_from_string(j.at("status").get<std::string>());
  for (const auto& r : j.at("recordings")) {
    s.recordings.push_back(
        {r.at("id").get<std::string>(), role_from_string(r.at("role").get<std::string>())});
  }
  return s;
}

json segment_score_to_json(const SegmentScore& sc) {
  return {{"s", sc.s},
          {"ops_mean", sc.ops_mean},
          {"tau_total_ms", sc.tau_total_ms},
          {"combined", sc.combined},
          {"flags",
           {{"occluded", sc.flags.occluded},
            {"low_confidence_alignment", sc.flags.low_confidence_alignment},
            {"missing", sc.flags.missing}}}};
}

namespace {

SegmentScore segment_score_from(const json& j) {
  SegmentScore sc;
  sc.s = j.at("s").get<std::size_t>();
  sc.ops_mean = j.at("ops_mean").get<double>();
  sc.tau_total_ms = j.at("tau_total_ms").get<double>();
  sc.combined = j.at("combined").get<double>();
  const json& f = j.at("flags");
  sc.flags.occluded = f.at("occluded").get<bool>();
  sc.flags.low_confidence_alignment = f.at("low_confidence_alignment").get<bool>();
  sc.flags.missing = f.at("missing").get<bool>();
  return sc;
}

AlignmentResult alignment_from(const json& j) {
  AlignmentResult a;
  a.segment = j.at("s").get<std::size_t>();
  a.leader = j.at("leader").get<std::size_t>();
  a.tau_total_ms = j.at("tau_total_ms").get<double>();
  for (const auto& f : j.at("followers")) {
    FollowerAlignment fa;
    fa.follower = f.at("follower").get<std::size_t>();
    fa.failure = f.value("failure", std::string());
    if (!f.at("tau_ms").is_null()) {
      SegmentShift sh;
      sh.tau_ms = f.at("tau_ms").get<double>();
      sh.shift_frames = f.at("shift_frames").get<int>();
      sh.peak_corr = f.at("peak_corr").get<double>();
      sh.low_confidence = f.at("low_confidence").get<bool>();
      fa.shift = sh;
    }
    a.followers.push_back(std::move(fa));
  }
  return a;
}

}  // namespace

json alignment_to_json(const AlignmentResult& a) {
  json j;
  j["s"] = a.segment;
  j["leader"] = a.leader;
  j["tau_total_ms"] = a.tau_total_ms;
  j["followers"] = json::array();
  for (const auto& f : a.followers) {
    json fj;
    fj["follower"] = f.follower;
    if (f.shift) {
      fj["tau_ms"] = f.shift->tau_ms;
      fj["shift_frames"] = f.shift->shift_frames;
      fj["peak_corr"] = f.shift->peak_corr;
      fj["low_confidence"] = f.shift->low_confidence;
    } else {
      fj["tau_ms"] = nullptr;
      fj["failure"] = f.failure;
    }
    j["followers"].push_back(std::move(fj));
  }
  return j;
}

json comparison_to_json(const ComparisonMatrix& m) {
  json j;
  j["session_ids"] = m.session_ids;
  j["practice_indices"] = m.practice_indices;
  j["segment_count"] = m.segment_count;
  auto matrix = [](const std::vector<std::vector<std::optional<double>>>& rows) {
    json out = json::array();
    for (const auto& row : rows) {
      json r = json::array();
      for (const auto& v : row) r.push_back(opt(v));
      out.push_back(std::move(r));
    }
    return out;
  };
  j["ops_mean"] = matrix(m.ops_mean);
  j["tau_total_ms"] = matrix(m.tau_total_ms);
  return j;
}

json spotlight_to_json(const SpotlightList& list) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : list.entries) j["entries"].push_back(segment_score_to_json(e));
  return j;
}

json report_to_json(const AnalysisReport& r, bool include_tracked) {
  json j;
  j["format_version"] = kReportFormatVersion;
  j["session_id"] = r.session_id;
  j["mode"] = to_string(r.mode);
  j["practice_index"] = r.practice_index;
  j["completed_stage"] = r.completed_stage;
  j["fps"] = r.fps;
  j["config"] = config_to_json(r.config);
  j["follower_offsets_ms"] = r.follower_offsets_ms;
  j["beats"] = {{"bpm", r.beats.bpm}, {"beat_times_ms", r.beats.beat_times_ms}};
  j["segments"] = json::array();
  for (const auto& s : r.segments) {
    j["segments"].push_back({{"s", s.index},
                             {"start_ms", s.start_ms},
                             {"end_ms", s.end_ms},
                             {"first_frame", s.first_frame},
                             {"last_frame", s.last_frame}});
  }
  if (include_tracked) {
    json tracked;
    tracked["fps"] = r.tracked.fps;
    tracked["timelines"] = json::array();
    for (const auto& tl : r.tracked.timelines) {
      json entries = json::array();
      for (const auto& e : tl) {
        entries.push_back({{"frame", e.frame_index},
                           {"time_ms", e.time_ms},
                           {"carried", e.carried},
                           {"keypoints", keypoints_json(e.skeleton)}});
      }
      tracked["timelines"].push_back(std::move(entries));
    }
    j["tracked"] = std::move(tracked);
  }
  j["frames"] = json::array();
  for (const auto& f : r.frames) {
    j["frames"].push_back({{"frame", f.frame_index},
                           {"time_ms", f.time_ms},
                           {"ops", opt(f.ops)},
                           {"occluded", f.occluded},
                           {"bpd", bpd_json(f.bpd)}});
  }
  j["alignments"] = json::array();
  for (const auto& a : r.alignments) j["alignments"].push_back(alignment_to_json(a));
  j["scores"] = json::array();
  for (const auto& sc : r.scores) j["scores"].push_back(segment_score_to_json(sc));
  return j;
}

AnalysisReport report_from_json(const json& j) {
  check_version(j, kReportFormatVersion, "report");
  try {
    AnalysisReport r;
    r.session_id = j.at("session_id").get<std::string>();
    r.mode = mode_from_string(j.at("mode").get<std::string>());
    r.practice_index = j.at("practice_index").get<int>();
    r.completed_stage = j.at("completed_stage").get<std::string>();
    r.fps = j.at("fps").get<double>();
    r.config = config_from_json(j.at("config"));
    r.follower_offsets_ms = j.at("follower_offsets_ms").get<std::vector<double>>();
    r.beats.bpm = j.at("beats").at("bpm").get<double>();
    r.beats.beat_times_ms = j.at("beats").at("beat_times_ms").get<std::vector<double>>();
    for (const auto& s : j.at("segments")) {
      Segment seg;
      seg.index = s.at("s").get<std::size_t>();
      seg.start_ms = s.at("start_ms").get<double>();
      seg.end_ms = s.at("end_ms").get<double>();
      seg.first_frame = s.at("first_frame").get<std::size_t>();
      seg.last_frame = s.at("last_frame").get<std::size_t>();
      r.segments.push_back(seg);
    }
    if (j.contains("tracked")) {
      r.tracked.fps = j.at("tracked").at("fps").get<double>();
      for (const auto& tl : j.at("tracked").at("timelines")) {
        Timeline timeline;
        for (const auto& e : tl) {
          TrackedEntry entry;
          entry.frame_index = e.at("frame").get<std::int64_t>();
          entry.time_ms = e.at("time_ms").get<std::int64_t>();
          entry.carried = e.at("carried").get<bool>();
          entry.skeleton = skeleton_from(e.at("keypoints"));
          timeline.push_back(std::move(entry));
        }
        r.tracked.timelines.push_back(std::move(timeline));
      }
    }
    for (const auto& f : j.at("frames")) {
      FrameResult fr;
      fr.frame_index = f.at("frame").get<std::int64_t>();
      fr.time_ms = f.at("time_ms").get<std::int64_t>();
      fr.ops = opt_double(f, "ops");
      fr.occluded = f.at("occluded").get<bool>();
      fr.bpd = bpd_from(f.at("bpd"));
      r.frames.push_back(std::move(fr));
    }
    for (const auto& a : j.at("alignments")) r.alignments.push_back(alignment_from(a));
    for (const auto& sc : j.at("scores")) r.scores.push_back(segment_score_from(sc));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("bad report: ") + e.what());
  }
}

std::string error_to_json(const Error& e) {
  json j;
  j["error"] = {{"stage", e.stage()}, {"code", to_string(e.code())}, {"message", e.detail()}};
  return j.dump();
}

void write_file_atomic(const fs::path& p, std::string_view data) {
  static std::atomic<unsigned long> counter{0};
  fs::create_directories(p.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id() << '.' << counter++;
  const fs::path tmp = p.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

fs::path SessionStore::dir(const std::string& id) const {
  check_id(id);
  return root_ / id;
}

json SessionStore::read_json(const fs::path& p) const {
  const std::string text = read_file(p);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, p.string() + ": " + e.what());
  }
}

bool SessionStore::exists(const std::string& id) const {
  return fs::exists(dir(id) / "session.json");
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (fs::exists(entry.path() / "session.json")) ids.push_back(entry.path().filename());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void SessionStore::save_session(const Session& s) {
  write_file_atomic(dir(s.id) / "session.json", session_to_json(s).dump(2));
}

Session SessionStore::load_session(const std::string& id) const {
  if (!exists(id)) throw Error(ErrorCode::kNotFound, "no session '" + id + "'");
  return session_from_json(read_json(dir(id) / "session.json"));
}

void SessionStore::save_recording(const std::string& session_id, const RecordingInput& in) {
  check_id(in.recording.id);
  const fs::path d = dir(session_id) / "recordings" / in.recording.id;
  json meta;
  meta["format_version"] = kSessionFormatVersion;
  meta["role"] = to_string(in.recording.role);
  meta["fps"] = in.recording.fps;
  meta["bpm"] = opt(in.bpm);
  meta["has_audio"] = in.audio.has_value();
  meta["has_beats"] = in.beats.has_value();
  write_file_atomic(d / "poses.jsonl", serialize_pose_stream(in.recording));
  if (in.audio) {
    const auto bytes = encode_wav16(*in.audio);
    write_file_atomic(d / "audio.wav",
                      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  if (in.beats) write_file_atomic(d / "beats.txt", format_beat_file(*in.beats));
  write_file_atomic(d / "meta.json", meta.dump(2));
}

SessionInputs SessionStore::load_inputs(const Session& s) const {
  SessionInputs inputs;
  inputs.mode = s.mode;
  for (const auto& ref : s.recordings) {
    const fs::path d = dir(s.id) / "recordings" / ref.id;
    const json meta = read_json(d / "meta.json");
    check_version(meta, kSessionFormatVersion, "recording");
    RecordingInput in;
    in.recording = parse_pose_stream(read_file(d / "poses.jsonl"), meta.at("fps").get<double>());
    in.recording.id = ref.id;
    in.recording.role = ref.role;
    in.bpm = opt_double(meta, "bpm");
    if (meta.value("has_audio", false)) {
      in.audio = read_wav(d / "audio.wav");
      in.recording.audio_ref = (d / "audio.wav").string();
    }
    if (meta.value("has_beats", false)) in.beats = parse_beat_file(read_file(d / "beats.txt"));
    inputs.recordings.push_back(std::move(in));
  }
  return inputs;
}

void SessionStore::save_config(const std::string& id, const AnalysisConfig& cfg) {
  json j = config_to_json(cfg);
  j["format_version"] = kSessionFormatVersion;
  if (cfg.model) {
    write_file_atomic(dir(id) / "model.txt", serialize_model(*cfg.model));
    j["model"] = "model.txt";
  }
  write_file_atomic(dir(id) / "config.json", j.dump(2));
}

AnalysisConfig SessionStore::load_config(const std::string& id) const {
  json j = read_json(dir(id) / "config.json");
  check_version(j, kSessionFormatVersion, "config");
  if (j.contains("model") && j.at("model").is_string()) {
    j["model"] = read_file(dir(id) / j.at("model").get<std::string>());
  }
  return config_from_json(j);
}

void SessionStore::save_report(const AnalysisReport& r) {
  write_file_atomic(dir(r.session_id) / "report.json", report_to_json(r).dump());
}

bool SessionStore::has_report(const std::string& id) const {
  return fs::exists(dir(id) / "report.json");
}

AnalysisReport SessionStore::load_report(const std::string& id) const {
  if (!has_report(id)) throw Error(ErrorCode::kNotFound, "no report for session '" + id + "'");
  return report_from_json(read_json(dir(id) / "report.json"));
}

void SessionStore::save_error(const std::string& id, const Error& e) {
  write_file_atomic(dir(id) / "error.json", error_to_json(e));
}

std::optional<std::string> SessionStore::load_error(const std::string& id) const {
  const fs::path p = dir(id) / "error.json";
  if (!fs::exists(p)) return std::nullopt;
  return read_file(p);
}

}  // namespace syncup
