#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "syncup/scoring.hpp"
#include "syncup/session_store.hpp"

namespace syncup {

// Owns sessions on disk and a pool of analysis workers. Status moves
// pending -> analyzing -> done | failed; a session only reads as done once
// its report is on disk.
class SessionManager {
 public:
  explicit SessionManager(std::filesystem::path root, std::size_t workers = 2);
  ~SessionManager();

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  Session create(Mode mode, int practice_index);
  // Returns the new recording's id.
  std::string add_recording(const std::string& id, RecordingInput input);
  // Queues an analysis; throws InvalidState while one is already running.
  Session analyze(const std::string& id, const AnalysisConfig& cfg);

  Session session(const std::string& id) const;
  // Throws InvalidState unless the session is done.
  AnalysisReport report(const std::string& id) const;
  // Stage/code/message JSON for failed sessions.
  std::optional<std::string> failure(const std::string& id) const;
  // Partial report of a failed session, if any stage completed.
  std::optional<AnalysisReport> partial_report(const std::string& id) const;

  // Blocks until the session is no longer analyzing.
  Session wait(const std::string& id) const;
  void wait_idle() const;

  SessionStore& store() { return store_; }

 private:
  struct Job {
    std::string id;
    AnalysisConfig cfg;
  };

  void worker_loop();
  void run_job(const Job& job);
  const AnalysisReport& cached_report(const std::string& id) const;

  SessionStore store_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::deque<Job> queue_;
  std::size_t running_ = 0;
  bool stopping_ = false;
  mutable std::map<std::string, std::shared_ptr<const AnalysisReport>> reports_;
  std::vector<std::thread> workers_;
};

class HttpService {
 public:
  explicit HttpService(SessionManager& sessions);
  ~HttpService();

  // Binds and serves until stop(); port 0 picks a free port.
  void listen(const std::string& host, int port);
  int bind(const std::string& host, int port);
  void serve();  // after bind()
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace syncup
