#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "syncup/scoring.hpp"

namespace syncup {

inline constexpr int kSessionFormatVersion = 1;

nlohmann::json config_to_json(const AnalysisConfig& cfg);
// Missing keys keep their defaults; `model` is serialized model text.
AnalysisConfig config_from_json(const nlohmann::json& j);

nlohmann::json session_to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);

nlohmann::json segment_score_to_json(const SegmentScore& sc);
nlohmann::json alignment_to_json(const AlignmentResult& a);
nlohmann::json comparison_to_json(const ComparisonMatrix& m);
nlohmann::json spotlight_to_json(const SpotlightList& list);

// Throws VersionMismatch when format_version differs from kReportFormatVersion.
nlohmann::json report_to_json(const AnalysisReport& r, bool include_tracked = true);
AnalysisReport report_from_json(const nlohmann::json& j);

std::string error_to_json(const Error& e);

// Layout under root:
//   <id>/session.json  <id>/config.json  <id>/report.json  <id>/model.txt
//   <id>/recordings/<rec>/{meta.json, poses.jsonl, audio.wav, beats.txt}
// Files are written to a temporary name and renamed into place.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  bool exists(const std::string& id) const;
  std::vector<std::string> list() const;

  void save_session(const Session& s);
  Session load_session(const std::string& id) const;

  void save_recording(const std::string& session_id, const RecordingInput& in);
  SessionInputs load_inputs(const Session& s) const;

  void save_config(const std::string& id, const AnalysisConfig& cfg);
  AnalysisConfig load_config(const std::string& id) const;

  void save_report(const AnalysisReport& r);
  AnalysisReport load_report(const std::string& id) const;
  bool has_report(const std::string& id) const;

  void save_error(const std::string& id, const Error& e);
  std::optional<std::string> load_error(const std::string& id) const;

 private:
  std::filesystem::path dir(const std::string& id) const;
  nlohmann::json read_json(const std::filesystem::path& p) const;

  std::filesystem::path root_;
};

void write_file_atomic(const std::filesystem::path& p, std::string_view data);
std::string read_file(const std::filesystem::path& p);

}  // namespace syncup
