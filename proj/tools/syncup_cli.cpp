// Offline front end mirroring the HTTP API.
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "syncup/audio_beats.hpp"
#include "syncup/error.hpp"
#include "syncup/render.hpp"
#include "syncup/scoring.hpp"
#include "syncup/service.hpp"
#include "syncup/session_store.hpp"

namespace fs = std::filesystem;
using namespace syncup;
using nlohmann::json;

namespace {

struct AnalyzeArgs {
  std::string mode = "group";
  std::string poses;
  std::vector<std::string> follower_poses;
  std::string audio;
  std::vector<std::string> follower_audio;
  std::string beats;
  std::optional<double> bpm;
  std::optional<double> fps;
  double lambda = kDefaultLambda;
  std::string method = "svr";
  std::string model;
  std::string train;
  std::size_t leader = 0;
  std::size_t n_bins = kDefaultBins;
  std::optional<double> max_shift_ms;
  double weight_pose = 0.5;
  double tau_cap_ms = 500.0;
  std::uint64_t seed = 0;
  int practice_index = 0;
  std::string out = "report";
};

RecordingInput load_input(const std::string& poses, const std::string& audio,
                          std::optional<double> fps, Role role) {
  RecordingInput in;
  in.recording = parse_pose_stream(read_file(poses), fps);
  in.recording.role = role;
  if (in.recording.id.empty()) in.recording.id = fs::path(poses).stem().string();
  if (!audio.empty()) {
    in.audio = read_wav(audio);
    in.recording.audio_ref = audio;
  }
  return in;
}

std::string alignment_csv(const AnalysisReport& r) {
  std::ostringstream out;
  out << "s,follower_id,tau_ms,peak_corr,flags\n";
  for (const auto& a : r.alignments) {
    for (const auto& f : a.followers) {
      out << a.segment << ',' << f.follower << ',';
      if (f.shift) {
        out << f.shift->tau_ms << ',' << f.shift->peak_corr << ','
            << (f.shift->low_confidence ? "low-confidence" : "");
      } else {
        out << ",," << (f.failure.empty() ? "missing" : f.failure);
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string scores_csv(const AnalysisReport& r) {
  std::ostringstream out;
  out.precision(10);
  out << "s,start_ms,end_ms,ops_mean,tau_total_ms,combined,occluded,low_confidence,missing\n";
  for (const auto& sc : r.scores) {
    out << sc.s << ',' << r.segments[sc.s].start_ms << ',' << r.segments[sc.s].end_ms << ','
        << sc.ops_mean << ',' << sc.tau_total_ms << ',' << sc.combined << ','
        << sc.flags.occluded << ',' << sc.flags.low_confidence_alignment << ','
        << sc.flags.missing << '\n';
  }
  return out.str();
}

int run_analyze(const AnalyzeArgs& a) {
  SessionInputs inputs;
  inputs.mode = mode_from_string(a.mode);
  const Role lead_role = inputs.mode == Mode::kGroup ? Role::kGroup : Role::kLeader;
  inputs.recordings.push_back(load_input(a.poses, a.audio, a.fps, lead_role));
  if (inputs.mode == Mode::kGroup && !a.follower_poses.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "--follower-poses needs --mode individual");
  }
  for (std::size_t i = 0; i < a.follower_poses.size(); ++i) {
    const std::string audio = i < a.follower_audio.size() ? a.follower_audio[i] : std::string();
    inputs.recordings.push_back(load_input(a.follower_poses[i], audio, a.fps, Role::kFollower));
  }
  if (!a.beats.empty()) inputs.recordings.front().beats = parse_beat_file(read_file(a.beats));
  inputs.recordings.front().bpm = a.bpm;

  AnalysisConfig cfg;
  cfg.lambda = a.lambda;
  cfg.method = ops_method_from_string(a.method);
  cfg.leader = a.leader;
  cfg.n_bins = a.n_bins;
  cfg.max_shift_ms = a.max_shift_ms;
  cfg.weight_pose = a.weight_pose;
  cfg.weight_time = 1.0 - a.weight_pose;
  cfg.tau_cap_ms = a.tau_cap_ms;
  cfg.seed = a.seed;
  if (!a.model.empty()) {
    cfg.model = parse_model(read_file(a.model));
  } else if (!a.train.empty()) {
    CvOptions opts;
    opts.lambda = a.lambda;
    opts.svr.seed = opts.nn.seed = a.seed;
    cfg.model = fit_model(cfg.method, parse_rating_csv(read_file(a.train)), opts);
  }

  const std::string id = fs::path(a.poses).stem().string();
  const AnalysisOutcome outcome = try_analyze_session(inputs, cfg, id, a.practice_index);
  const AnalysisReport& report = outcome.report;
  const fs::path out(a.out);
  fs::create_directories(out);
  write_file_atomic(out / "report.json", report_to_json(report).dump(2));
  if (outcome.error) {
    std::cerr << error_to_json(*outcome.error) << '\n';
    return 2;
  }
  write_file_atomic(out / "scores.csv", scores_csv(report));
  write_file_atomic(out / "alignment.csv", alignment_csv(report));
  write_file_atomic(out / "spotlight.json", spotlight_to_json(spotlight(report)).dump(2));
  write_file_atomic(out / "heatmap.svg", export_heatmaps(report, HeatmapFormat::kSvg));
  write_file_atomic(out / "heatmap.jsonl", export_heatmaps(report, HeatmapFormat::kObjectStream));
  write_file_atomic(out / "overlay.jsonl", export_overlay_stream(report));
  if (cfg.model) write_file_atomic(out / "model.txt", serialize_model(*cfg.model));
  std::cout << "segments: " << report.scores.size() << "  dancers: "
            << report.tracked.dancer_count() << "  bpm: " << report.beats.bpm << '\n'
            << "wrote " << out.string() << '\n';
  return 0;
}

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dance synchronization analysis"};
  app.require_subcommand(1);

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Analyze one session offline");
  analyze->add_option("--mode", aa.mode)->check(CLI::IsMember({"group", "individual"}));
  analyze->add_option("--poses", aa.poses, "Group or leader pose stream")->required();
  analyze->add_option("--follower-poses", aa.follower_poses, "Follower pose streams");
  analyze->add_option("--audio", aa.audio, "Group or leader audio (WAV)");
  analyze->add_option("--follower-audio", aa.follower_audio, "Follower audio, per follower");
  analyze->add_option("--beats", aa.beats, "Beat file");
  analyze->add_option("--bpm", aa.bpm, "Constant tempo");
  analyze->add_option("--fps", aa.fps, "Frame rate when the stream has no header");
  analyze->add_option("--lambda", aa.lambda)->check(CLI::PositiveNumber);
  analyze->add_option("--method", aa.method)
      ->check(CLI::IsMember({"addition", "svr", "nn-short", "nn-long", "nn_short", "nn_long"}));
  analyze->add_option("--model", aa.model, "Trained model file");
  analyze->add_option("--train", aa.train, "Rating CSV to train the model on first");
  analyze->add_option("--leader", aa.leader);
  analyze->add_option("--n-bins", aa.n_bins);
  analyze->add_option("--max-shift-ms", aa.max_shift_ms);
  analyze->add_option("--weight-pose", aa.weight_pose)->check(CLI::Range(0.0, 1.0));
  analyze->add_option("--tau-cap-ms", aa.tau_cap_ms)->check(CLI::PositiveNumber);
  analyze->add_option("--seed", aa.seed);
  analyze->add_option("--practice-index", aa.practice_index);
  analyze->add_option("--out", aa.out);

  std::string train_data, train_method = "svr", train_out = "model.txt";
  double train_lambda = kDefaultLambda;
  std::uint64_t train_seed = 0;
  std::optional<std::size_t> train_epochs;
  auto* train = app.add_subcommand("train", "Train an OPS regressor");
  train->add_option("--data", train_data, "Rating CSV")->required();
  train->add_option("--method", train_method);
  train->add_option("--lambda", train_lambda)->check(CLI::PositiveNumber);
  train->add_option("--seed", train_seed);
  train->add_option("--epochs", train_epochs);
  train->add_option("--out", train_out);

  std::string cv_data, cv_out;
  std::vector<std::string> cv_methods = {"addition", "svr", "nn-short", "nn-long"};
  double cv_lambda = kDefaultLambda;
  std::uint64_t cv_seed = 0;
  auto* cv = app.add_subcommand("cv", "Leave-one-source-out cross-validation");
  cv->add_option("--data", cv_data, "Rating CSV")->required();
  cv->add_option("--methods", cv_methods)->delimiter(',');
  cv->add_option("--lambda", cv_lambda)->check(CLI::PositiveNumber);
  cv->add_option("--seed", cv_seed);
  cv->add_option("--out", cv_out, "Write predictions CSV here");

  std::string validate_poses;
  std::optional<double> validate_fps;
  double validate_threshold = kDefaultConfidenceThreshold;
  auto* validate = app.add_subcommand("validate", "Check a pose stream");
  validate->add_option("--poses", validate_poses)->required();
  validate->add_option("--fps", validate_fps);
  validate->add_option("--confidence-threshold", validate_threshold);

  std::string beats_audio, beats_out;
  auto* beats = app.add_subcommand("beats", "Estimate beats from a WAV file");
  beats->add_option("--audio", beats_audio)->required();
  beats->add_option("--out", beats_out);

  std::string serve_root = "sessions", serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::size_t serve_workers = 2;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--root", serve_root);
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);
  serve->add_option("--workers", serve_workers);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return run_analyze(aa);

    if (*train) {
      const RatingDataset data = parse_rating_csv(read_file(train_data));
      CvOptions opts;
      opts.lambda = train_lambda;
      opts.svr.seed = opts.nn.seed = train_seed;
      if (train_epochs) opts.svr.epochs = opts.nn.epochs = *train_epochs;
      const RegressorModel model = fit_model(ops_method_from_string(train_method), data, opts);
      write_file_atomic(train_out, serialize_model(model));
      std::cout << "trained " << to_string(model.method) << " on " << data.size()
                << " samples";
      if (!model.loss_curve.empty()) std::cout << ", final loss " << model.loss_curve.back();
      std::cout << '\n';
      return 0;
    }

    if (*cv) {
      const RatingDataset data = parse_rating_csv(read_file(cv_data));
      std::vector<OpsMethod> methods;
      for (const auto& m : cv_methods) methods.push_back(ops_method_from_string(m));
      CvOptions opts;
      opts.lambda = cv_lambda;
      opts.svr.seed = opts.nn.seed = cv_seed;
      const auto results = cross_validate(data, methods, opts);
      std::printf("%-10s %6s %10s %10s\n", "method", "folds", "rmse", "pearson_r");
      for (const auto& r : results) {
        std::printf("%-10s %6zu %10.4f %10s\n", std::string(to_string(r.method)).c_str(),
                    r.folds, r.rmse,
                    r.pearson_r ? std::to_string(*r.pearson_r).c_str() : "undefined");
      }
      if (!cv_out.empty()) {
        std::ostringstream csv;
        csv.precision(10);
        csv << "source_id,frame,rating";
        for (const auto& r : results) csv << ',' << to_string(r.method);
        csv << '\n';
        for (std::size_t i = 0; i < data.size(); ++i) {
          csv << data.samples[i].source_id << ',' << data.samples[i].frame << ','
              << data.samples[i].rating;
          for (const auto& r : results) csv << ',' << r.predictions[i];
          csv << '\n';
        }
        write_file_atomic(cv_out, csv.str());
      }
      return 0;
    }

    if (*validate) {
      const Recording r = parse_pose_stream(read_file(validate_poses), validate_fps);
      const ValidationReport v = validate_recording(r, validate_threshold);
      json j;
      j["frames"] = r.frames.size();
      j["fps"] = r.fps;
      j["modal_count"] = v.modal_count;
      j["low_confidence"] = json::array();
      for (const auto& l : v.low_confidence) {
        j["low_confidence"].push_back(
            {{"frame", l.frame_index}, {"skeleton", l.skeleton}, {"mean_confidence", l.mean_confidence}});
      }
      j["count_anomalies"] = json::array();
      for (const auto& c : v.count_anomalies) {
        j["count_anomalies"].push_back({{"frame", c.frame_index}, {"count", c.count}});
      }
      j["timing_anomalies"] = json::array();
      for (const auto& t : v.timing_anomalies) {
        j["timing_anomalies"].push_back({{"frame", t.frame_index}, {"spacing_ms", t.spacing_ms}});
      }
      std::cout << j.dump(2) << '\n';
      return v.empty() ? 0 : 1;
    }

    if (*beats) {
      const AudioClip clip = read_wav(beats_audio);
      const BeatGrid grid = estimate_beats(onset_envelope(clip.samples, clip.sample_rate));
      const std::string text = format_beat_file(grid);
      if (beats_out.empty()) {
        std::cout << text;
      } else {
        write_file_atomic(beats_out, text);
      }
      return 0;
    }

    if (*serve) {
      SessionManager sessions(serve_root, serve_workers);
      HttpService service(sessions);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int port = service.bind(serve_host, serve_port);
      std::cout << "listening on http://" << serve_host << ':' << port << std::endl;
      service.serve();
      g_service = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << error_to_json(e) << '\n';
    return 2;
  }
  return 0;
}
