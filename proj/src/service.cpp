#include "syncup/service.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "syncup/render.hpp"

namespace syncup {

namespace fs = std::filesystem;
using nlohmann::json;

SessionManager::SessionManager(fs::path root, std::size_t workers) : store_(std::move(root)) {
  // Sessions interrupted by a previous shutdown cannot resume their job.
  for (const auto& id : store_.list()) {
    Session s = store_.load_session(id);
    if (s.status == SessionStatus::kAnalyzing) {
      s.status = SessionStatus::kFailed;
      store_.save_error(id, Error(ErrorCode::kInvalidState, "analysis interrupted", "service"));
      store_.save_session(s);
    }
  }
  for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

SessionManager::~SessionManager() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) t.join();
}

Session SessionManager::create(Mode mode, int practice_index) {
  std::lock_guard lock(mu_);
  const auto ids = store_.list();
  std::size_t next = ids.size() + 1;
  char buf[32];
  do {
    std::snprintf(buf, sizeof buf, "session-%04zu", next++);
  } while (store_.exists(buf));
  Session s;
  s.id = buf;
  s.mode = mode;
  s.practice_index = practice_index;
  store_.save_session(s);
  return s;
}

std::string SessionManager::add_recording(const std::string& id, RecordingInput input) {
  std::lock_guard lock(mu_);
  Session s = store_.load_session(id);
  if (s.status == SessionStatus::kAnalyzing) {
    throw Error(ErrorCode::kInvalidState, "session '" + id + "' is being analyzed");
  }
  const Role role = input.recording.role;
  if (s.mode == Mode::kGroup) {
    if (role != Role::kGroup) {
      throw Error(ErrorCode::kInvalidArgument, "group sessions take a recording with role group");
    }
    if (!s.recordings.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "group session already has its recording");
    }
  } else {
    if (role == Role::kGroup) {
      throw Error(ErrorCode::kInvalidArgument,
                  "individual sessions take leader or follower recordings");
    }
    if (role == Role::kLeader &&
        std::any_of(s.recordings.begin(), s.recordings.end(),
                    [](const RecordingRef& r) { return r.role == Role::kLeader; })) {
      throw Error(ErrorCode::kInvalidArgument, "session already has a leader recording");
    }
  }
  input.recording.id = "rec-" + std::to_string(s.recordings.size() + 1);
  store_.save_recording(id, input);
  s.recordings.push_back({input.recording.id, role});
  s.status = SessionStatus::kPending;
  store_.save_session(s);
  reports_.erase(id);
  return input.recording.id;
}

Session SessionManager::analyze(const std::string& id, const AnalysisConfig& cfg) {
  Session s;
  {
    std::lock_guard lock(mu_);
    s = store_.load_session(id);
    if (s.status == SessionStatus::kAnalyzing) {
      throw Error(ErrorCode::kInvalidState, "session '" + id + "' is already being analyzed");
    }
    if (s.recordings.empty()) {
      throw Error(ErrorCode::kInvalidState, "session '" + id + "' has no recordings");
    }
    store_.save_config(id, cfg);
    fs::remove(store_.root() / id / "report.json");
    fs::remove(store_.root() / id / "error.json");
    reports_.erase(id);
    s.status = SessionStatus::kAnalyzing;
    store_.save_session(s);
    queue_.push_back({id, cfg});
  }
  cv_.notify_all();
  return s;
}

void SessionManager::worker_loop() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
      ++running_;
    }
    run_job(job);
    {
      std::lock_guard lock(mu_);
      --running_;
    }
    cv_.notify_all();
  }
}

void SessionManager::run_job(const Job& job) {
  std::optional<Error> error;
  std::optional<AnalysisReport> report;
  try {
    Session s;
    {
      std::lock_guard lock(mu_);
      s = store_.load_session(job.id);
    }
    SessionInputs inputs;
    try {
      inputs = store_.load_inputs(s);
    } catch (const Error& e) {
      throw e.with_stage("ingest");
    }
    AnalysisOutcome out = try_analyze_session(inputs, job.cfg, s.id, s.practice_index);
    error = out.error;
    report = std::move(out.report);
  } catch (const Error& e) {
    error = e.stage().empty() ? e.with_stage("service") : e;
  } catch (const std::exception& e) {
    error = Error(ErrorCode::kIo, e.what(), "service");
  }

  std::lock_guard lock(mu_);
  try {
    Session s = store_.load_session(job.id);
    if (report) store_.save_report(*report);
    if (error) {
      store_.save_error(job.id, *error);
      s.status = SessionStatus::kFailed;
    } else {
      reports_[job.id] = std::make_shared<const AnalysisReport>(std::move(*report));
      s.status = SessionStatus::kDone;
    }
    store_.save_session(s);
  } catch (const std::exception&) {
    // Leave the session analyzing-free even when the disk write fails.
    try {
      Session s = store_.load_session(job.id);
      s.status = SessionStatus::kFailed;
      store_.save_session(s);
    } catch (...) {
    }
  }
}

Session SessionManager::session(const std::string& id) const {
  std::lock_guard lock(mu_);
  return store_.load_session(id);
}

const AnalysisReport& SessionManager::cached_report(const std::string& id) const {
  auto it = reports_.find(id);
  if (it == reports_.end()) {
    it = reports_.emplace(id, std::make_shared<const AnalysisReport>(store_.load_report(id))).first;
  }
  return *it->second;
}

AnalysisReport SessionManager::report(const std::string& id) const {
  std::lock_guard lock(mu_);
  const Session s = store_.load_session(id);
  if (s.status != SessionStatus::kDone) {
    throw Error(ErrorCode::kInvalidState,
                "session '" + id + "' is " + std::string(to_string(s.status)));
  }
  return cached_report(id);
}

std::optional<std::string> SessionManager::failure(const std::string& id) const {
  std::lock_guard lock(mu_);
  return store_.load_error(id);
}

std::optional<AnalysisReport> SessionManager::partial_report(const std::string& id) const {
  std::lock_guard lock(mu_);
  const Session s = store_.load_session(id);
  if (s.status != SessionStatus::kFailed || !store_.has_report(id)) return std::nullopt;
  return store_.load_report(id);
}

Session SessionManager::wait(const std::string& id) const {
  std::unique_lock lock(mu_);
  Session s = store_.load_session(id);
  while (s.status == SessionStatus::kAnalyzing) {
    cv_.wait(lock);
    s = store_.load_session(id);
  }
  return s;
}

void SessionManager::wait_idle() const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kInvalidState: return 409;
    case ErrorCode::kIo: return 500;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMalformedRecord:
    case ErrorCode::kNonMonotonicTime:
    case ErrorCode::kBadKeypointCount:
    case ErrorCode::kEmptyRecording:
    case ErrorCode::kVersionMismatch: return 400;
    default: return 422;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  res.status = http_status(e.code());
  res.set_content(error_to_json(e), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("request body is not JSON: ") + e.what(),
                "request");
  }
}

std::optional<std::string> form_value(const httplib::Request& req, const std::string& key) {
  if (req.has_file(key)) return req.get_file_value(key).content;
  if (req.has_param(key)) return req.get_param_value(key);
  return std::nullopt;
}

double parse_number(const std::string& text, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad ") + what + " '" + text + "'");
  }
  return v;
}

RecordingInput recording_from_request(const httplib::Request& req) {
  const bool multipart = req.is_multipart_form_data();
  const auto role = form_value(req, "role");
  if (!role) throw Error(ErrorCode::kInvalidArgument, "missing role");
  std::optional<double> fps;
  if (const auto v = form_value(req, "fps")) fps = parse_number(*v, "fps");
  const auto poses = multipart ? form_value(req, "poses") : std::optional<std::string>(req.body);
  if (!poses || poses->empty()) throw Error(ErrorCode::kInvalidArgument, "missing pose stream");

  RecordingInput in;
  in.recording = parse_pose_stream(*poses, fps);
  in.recording.role = role_from_string(*role);
  if (multipart && req.has_file("audio")) {
    const auto& content = req.get_file_value("audio").content;
    in.audio = decode_wav(std::span(reinterpret_cast<const std::uint8_t*>(content.data()),
                                    content.size()));
  }
  if (const auto beats = multipart ? form_value(req, "beats") : std::nullopt) {
    in.beats = parse_beat_file(*beats);
  }
  if (const auto bpm = form_value(req, "bpm")) in.bpm = parse_number(*bpm, "bpm");
  return in;
}

json session_json(const Session& s, const SessionManager& m) {
  json j = session_to_json(s);
  j.erase("format_version");
  if (s.status == SessionStatus::kFailed) {
    if (const auto err = m.failure(s.id)) j["error"] = json::parse(*err).at("error");
  }
  return j;
}

std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> ids;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    if (comma > start) ids.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return ids;
}

}  // namespace

struct HttpService::Impl {
  SessionManager& sessions;
  httplib::Server server;

  explicit Impl(SessionManager& m) : sessions(m) { routes(); }

  template <typename F>
  httplib::Server::Handler guarded(const char* stage, F&& handler) {
    return [this, stage, handler = std::forward<F>(handler)](const httplib::Request& req,
                                                             httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_error(res, e.stage().empty() ? e.with_stage(stage) : e);
      } catch (const std::exception& e) {
        send_error(res, Error(ErrorCode::kInvalidArgument, e.what(), stage));
      }
    };
  }

  void routes() {
    server.Post("/sessions", guarded("request", [this](const auto& req, auto& res) {
      const json body = parse_body(req);
      const Mode mode = mode_from_string(body.value("mode", std::string("group")));
      const Session s = sessions.create(mode, body.value("practice_index", 0));
      send_json(res, 201, session_json(s, sessions));
    }));

    server.Get("/sessions/:id", guarded("request", [this](const auto& req, auto& res) {
      send_json(res, 200, session_json(sessions.session(req.path_params.at("id")), sessions));
    }));

    server.Post("/sessions/:id/recordings", guarded("ingest", [this](const auto& req, auto& res) {
      const std::string id = req.path_params.at("id");
      sessions.session(id);
      const std::string rec = sessions.add_recording(id, recording_from_request(req));
      send_json(res, 201, {{"id", rec}, {"session", session_json(sessions.session(id), sessions)}});
    }));

    server.Post("/sessions/:id/analyze", guarded("request", [this](const auto& req, auto& res) {
      const AnalysisConfig cfg = config_from_json(parse_body(req));
      send_json(res, 202, session_json(sessions.analyze(req.path_params.at("id"), cfg), sessions));
    }));

    server.Get("/sessions/:id/report", guarded("request", [this](const auto& req, auto& res) {
      const std::string id = req.path_params.at("id");
      const Session s = sessions.session(id);
      if (s.status == SessionStatus::kFailed) {
        json body = json::parse(sessions.failure(id).value_or("{}"));
        if (const auto partial = sessions.partial_report(id)) {
          body["partial_report"] = report_to_json(*partial, false);
        }
        send_json(res, 422, body);
        return;
      }
      const bool full = req.get_param_value("tracked") == "1";
      send_json(res, 200, report_to_json(sessions.report(id), full));
    }));

    server.Get("/sessions/:id/spotlight", guarded("request", [this](const auto& req, auto& res) {
      send_json(res, 200, spotlight_to_json(spotlight(sessions.report(req.path_params.at("id")))));
    }));

    server.Get("/sessions/:id/overlay", guarded("request", [this](const auto& req, auto& res) {
      const AnalysisReport report = sessions.report(req.path_params.at("id"));
      if (!req.has_param("frame")) {
        res.set_content(export_overlay_stream(report), "application/x-ndjson");
        return;
      }
      const auto frame =
          static_cast<std::int64_t>(parse_number(req.get_param_value("frame"), "frame"));
      const auto t = find_frame(report, frame);
      if (!t) throw Error(ErrorCode::kNotFound, "frame " + std::to_string(frame) + " not found");
      res.set_content(overlay_frame_json(overlay_frame(report, *t)), "application/json");
    }));

    server.Get("/sessions/:id/heatmap", guarded("request", [this](const auto& req, auto& res) {
      const AnalysisReport report = sessions.report(req.path_params.at("id"));
      if (req.get_param_value("format") == "svg") {
        res.set_content(export_heatmaps(report, HeatmapFormat::kSvg), "image/svg+xml");
      } else {
        res.set_content(export_heatmaps(report, HeatmapFormat::kObjectStream),
                        "application/x-ndjson");
      }
    }));

    server.Get("/comparison", guarded("request", [this](const auto& req, auto& res) {
      std::vector<AnalysisReport> reports;
      for (const auto& id : split_ids(req.get_param_value("ids"))) {
        reports.push_back(sessions.report(id));
      }
      send_json(res, 200, comparison_to_json(compare_practices(reports)));
    }));
  }
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

HttpService::~HttpService() { stop(); }

void HttpService::listen(const std::string& host, int port) {
  bind(host, port);
  serve();
}

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpService::serve() {
  impl_->server.listen_after_bind();
}

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpService::running() const { return impl_->server.is_running(); }

}  // namespace syncup
