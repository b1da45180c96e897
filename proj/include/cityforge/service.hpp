#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cityforge/config.hpp"
#include "cityforge/edit.hpp"

namespace httplib {
class Server;
}

namespace cityforge::service {

struct ServiceOptions {
  AppConfig config;
  std::string static_dir;     // served at "/" when set
  std::string snapshot_path;  // restored on start, written on stop when set
  std::string scorer_url;     // external semantic scorer; empty -> stub
  bool allow_stub_fallback = false;
};

/// Local HTTP front end over sessions. Routes:
///
///   POST /sessions                      create from a block program (201)
///   GET  /sessions/{id}/program         [?revision=n]
///   GET  /sessions/{id}/scene.glb       [?revision=n], X-Revision header
///   POST /sessions/{id}/edits           {"base_revision", "command"}; 409 when stale
///   GET  /sessions/{id}/score           [?prompt=...]
///   GET  /sessions/{id}/report
///
/// Edits on one session are serialized; a stale base_revision never applies.
class CityService {
 public:
  explicit CityService(ServiceOptions options);
  ~CityService();
  CityService(const CityService&) = delete;
  CityService& operator=(const CityService&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();
  /// Only asks the listener to return; safe from a signal handler.
  void interrupt();

  int port() const { return port_; }
  std::string snapshot_json() const;
  void restore_snapshot(const std::string& json_text);

 private:
  struct Revision {
    int number = 1;
    edit::CityProgram program;
    std::string command;  // empty for the initial revision
  };
  struct Session {
    std::string id;
    double floor_height = 3.0;
    std::uint64_t seed = 0;
    std::string prompt;
    std::mutex mutex;
    std::vector<Revision> revisions;
    std::map<int, std::shared_ptr<const std::vector<std::uint8_t>>> scenes;
  };

  void install_routes();
  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<const std::vector<std::uint8_t>> scene_for(Session& session, const Revision& rev);
  void write_snapshot() const;

  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
};

}  // namespace cityforge::service
