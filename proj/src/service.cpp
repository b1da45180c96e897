#include "cityforge/service.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cityforge/error.hpp"
#include "cityforge/executor.hpp"
#include "cityforge/metrics.hpp"
#include "cityforge/scene_io.hpp"
#include "cityforge/scoring.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cityforge::service {
namespace {

using Json = nlohmann::ordered_json;

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const std::string& path = {}) {
  Json body{{"error", code}, {"message", message}};
  if (!path.empty()) body["path"] = path;
  send_json(res, status, body);
}

void send_error(httplib::Response& res, int status, const Error& e) {
  send_error(res, status, std::string(to_string(e.code())), e.what(), e.path());
}

Json program_json(const edit::CityProgram& program) {
  Json buildings = Json::object();
  for (const auto& [id, bp] : program.buildings) buildings[id] = Json::parse(serialize(bp));
  return {{"block", Json::parse(serialize(program.block))}, {"buildings", buildings}};
}

edit::CityProgram program_from(const Json& block, const Json& buildings, std::vector<std::string>& notes) {
  edit::CityProgram program;
  const std::string block_text = block.is_string() ? block.get<std::string>() : block.dump();
  auto parsed = parse_block_program(block_text);
  for (const auto& n : parsed.notes) notes.push_back(n.path + ": " + n.message);
  program.block = std::move(parsed.program);
  if (!buildings.is_null()) {
    if (!buildings.is_object()) throw Error(Errc::WrongType, "buildings must map element ids to programs", "buildings");
    for (const auto& [id, body] : buildings.items()) {
      const std::string text = body.is_string() ? body.get<std::string>() : body.dump();
      auto bp = parse_building_program(text);
      for (const auto& n : bp.notes) notes.push_back("buildings." + id + n.path.substr(1) + ": " + n.message);
      program.buildings[id] = std::move(bp.program);
    }
  }
  return program;
}

std::optional<int> query_int(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string v = req.get_param_value(key);
    const int n = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(key);
    return n;
  } catch (const std::exception&) {
    throw Error(Errc::BadArguments, std::string(key) + " must be an integer", key);
  }
}

Json score_json(const scoring::SpatialScore& s) {
  return {{"s_align", s.s_align},
          {"s_plau", s.s_plau},
          {"s_overlap", s.s_overlap},
          {"s_density", s.s_density},
          {"s_spatial", s.s_spatial},
          {"semantic_source", std::string(scoring::to_string(s.semantic_source))}};
}

}  // namespace

CityService::CityService(ServiceOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  if (!options_.snapshot_path.empty() && std::filesystem::exists(options_.snapshot_path)) {
    std::ifstream in(options_.snapshot_path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    restore_snapshot(ss.str());
  }
  install_routes();
}

CityService::~CityService() { stop(); }

int CityService::start(const std::string& host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(Errc::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void CityService::run(const std::string& host, int port) {
  if (!server_->bind_to_port(host, port)) throw Error(Errc::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
  port_ = port;
  server_->listen_after_bind();
}

void CityService::interrupt() {
  if (server_) server_->stop();
}

void CityService::stop() {
  if (server_ && server_->is_running()) server_->stop();
  if (thread_.joinable()) thread_.join();
  if (!options_.snapshot_path.empty()) {
    try {
      write_snapshot();
    } catch (const Error&) {
      // Shutdown must not throw; the snapshot is best effort.
    }
  }
}

std::shared_ptr<CityService::Session> CityService::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<const std::vector<std::uint8_t>> CityService::scene_for(Session& session, const Revision& rev) {
  // Caller holds session.mutex.
  if (const auto it = session.scenes.find(rev.number); it != session.scenes.end()) return it->second;
  executor::ExecutorConfig cfg = options_.config.executor_config();
  cfg.floor_height = session.floor_height;
  cfg.seed = session.seed;
  const auto scene = executor::assemble_scene(rev.program.block, rev.program.buildings, cfg);
  auto bytes = std::make_shared<const std::vector<std::uint8_t>>(glb_bytes(scene));
  session.scenes[rev.number] = bytes;
  return bytes;
}

void CityService::install_routes() {
  auto& svr = *server_;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Expose-Headers", "X-Revision"}});
  svr.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (!options_.static_dir.empty()) svr.set_mount_point("/", options_.static_dir);

  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, 400, e);
    } catch (const std::exception& e) {
      send_error(res, 500, "InternalError", e.what());
    }
  });

  svr.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });

  svr.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
    Json list = Json::array();
    std::lock_guard lock(sessions_mutex_);
    for (const auto& [id, s] : sessions_) {
      std::lock_guard slock(s->mutex);
      list.push_back({{"session", id}, {"revision", s->revisions.back().number}});
    }
    send_json(res, 200, {{"sessions", list}});
  });

  svr.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const Json::exception& e) {
      send_error(res, 400, "MalformedJson", e.what());
      return;
    }
    auto session = std::make_shared<Session>();
    session->floor_height = options_.config.executor.floor_height;
    session->seed = options_.config.executor.seed;
    std::vector<std::string> notes;
    Revision first;
    try {
      if (body.is_object() && body.contains("block")) {
        first.program = program_from(body["block"], body.value("buildings", Json()), notes);
        if (body.contains("floor_height")) {
          if (!body["floor_height"].is_number() || !(body["floor_height"].get<double>() > 0.0)) {
            throw Error(Errc::WrongType, "floor_height must be a positive number", "floor_height");
          }
          session->floor_height = body["floor_height"].get<double>();
        }
        if (body.contains("seed")) {
          if (!body["seed"].is_number_unsigned()) throw Error(Errc::WrongType, "seed must be a non-negative integer", "seed");
          session->seed = body["seed"].get<std::uint64_t>();
        }
        if (body.contains("prompt")) session->prompt = body["prompt"].get<std::string>();
      } else {
        first.program = program_from(body, Json(), notes);
      }
    } catch (const Error& e) {
      send_error(res, 400, e);
      return;
    } catch (const Json::exception& e) {
      send_error(res, 400, "WrongType", e.what());
      return;
    }
    session->revisions.push_back(std::move(first));
    {
      std::lock_guard lock(sessions_mutex_);
      session->id = "s" + std::to_string(next_session_++);
      sessions_[session->id] = session;
    }
    Json out = program_json(session->revisions.back().program);
    out["session"] = session->id;
    out["revision"] = 1;
    out["floor_height"] = session->floor_height;
    out["seed"] = session->seed;
    out["warnings"] = notes;
    send_json(res, 201, out);
  });

  svr.Get(R"(/sessions/([^/]+)/program)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = find(req.matches[1]);
    if (!session) return send_error(res, 404, "UnknownSession", "no session '" + std::string(req.matches[1]) + "'");
    const auto wanted = query_int(req, "revision");
    std::lock_guard lock(session->mutex);
    const Revision* rev = &session->revisions.back();
    if (wanted) {
      if (*wanted < 1 || *wanted > static_cast<int>(session->revisions.size())) {
        return send_error(res, 404, "UnknownRevision", "no revision " + std::to_string(*wanted));
      }
      rev = &session->revisions[static_cast<std::size_t>(*wanted - 1)];
    }
    Json out = program_json(rev->program);
    out["session"] = session->id;
    out["revision"] = rev->number;
    res.set_header("X-Revision", std::to_string(rev->number));
    send_json(res, 200, out);
  });

  svr.Get(R"(/sessions/([^/]+)/scene\.glb)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = find(req.matches[1]);
    if (!session) return send_error(res, 404, "UnknownSession", "no session '" + std::string(req.matches[1]) + "'");
    const auto wanted = query_int(req, "revision");
    std::lock_guard lock(session->mutex);
    const Revision* rev = &session->revisions.back();
    if (wanted) {
      if (*wanted < 1 || *wanted > static_cast<int>(session->revisions.size())) {
        return send_error(res, 404, "UnknownRevision", "no revision " + std::to_string(*wanted));
      }
      rev = &session->revisions[static_cast<std::size_t>(*wanted - 1)];
    }
    try {
      const auto bytes = scene_for(*session, *rev);
      res.set_header("X-Revision", std::to_string(rev->number));
      res.set_content(reinterpret_cast<const char*>(bytes->data()), bytes->size(), "model/gltf-binary");
    } catch (const Error& e) {
      send_error(res, 422, e);
    }
  });

  svr.Post(R"(/sessions/([^/]+)/edits)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = find(req.matches[1]);
    if (!session) return send_error(res, 404, "UnknownSession", "no session '" + std::string(req.matches[1]) + "'");
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const Json::exception& e) {
      return send_error(res, 400, "MalformedJson", e.what());
    }
    if (!body.is_object() || !body.contains("base_revision") || !body["base_revision"].is_number_integer()) {
      return send_error(res, 400, "BadArguments", "edit needs an integer base_revision");
    }
    if (!body.contains("command")) return send_error(res, 400, "BadArguments", "edit needs a command");
    edit::EditCommand command;
    try {
      command = body["command"].is_string() ? edit::parse_edit_command(body["command"].get<std::string>())
                                            : edit::command_from_json(body["command"].dump());
    } catch (const Error& e) {
      return send_error(res, 400, e);
    }
    const int base = body["base_revision"].get<int>();

    std::lock_guard lock(session->mutex);
    const Revision& head = session->revisions.back();
    if (base != head.number) {
      return send_json(res, 409,
                       {{"error", "RevisionConflict"},
                        {"message", "base revision " + std::to_string(base) + " is stale"},
                        {"current_revision", head.number}});
    }
    edit::EditResult result;
    try {
      edit::EditOptions opts;
      result = edit::apply_edit(head.program, command, opts);
    } catch (const Error& e) {
      return send_error(res, 400, e);
    }
    int revision = head.number;
    if (!result.diff.empty()) {
      Revision next;
      next.number = head.number + 1;
      next.program = std::move(result.after);
      next.command = edit::format_command(command);
      session->revisions.push_back(std::move(next));
      revision = session->revisions.back().number;
    }
    Json out;
    out["session"] = session->id;
    out["revision"] = revision;
    out["diff"] = Json::parse(edit::diff_json(result.diff));
    out["warnings"] = result.warnings;
    out["program"] = program_json(session->revisions.back().program);
    res.set_header("X-Revision", std::to_string(revision));
    send_json(res, 200, out);
  });

  svr.Get(R"(/sessions/([^/]+)/score)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = find(req.matches[1]);
    if (!session) return send_error(res, 404, "UnknownSession", "no session '" + std::string(req.matches[1]) + "'");
    BlockProgram block;
    int revision = 0;
    std::string prompt;
    {
      std::lock_guard lock(session->mutex);
      block = session->revisions.back().program.block;
      revision = session->revisions.back().number;
      prompt = req.has_param("prompt") ? req.get_param_value("prompt") : session->prompt;
    }
    scoring::ScoringOptions opts;
    opts.band = options_.config.band;
    opts.raster_resolution = options_.config.raster_resolution;
    opts.palette = options_.config.palette;
    opts.allow_stub_fallback = options_.allow_stub_fallback;
    try {
      scoring::SpatialScore score;
      if (options_.scorer_url.empty()) {
        score = scoring::score_spatial(block, prompt, scoring::StubScorer{}, opts);
      } else {
        score = scoring::score_spatial(block, prompt, scoring::HttpScorer({options_.scorer_url}), opts);
      }
      Json out = score_json(score);
      out["session"] = session->id;
      out["revision"] = revision;
      send_json(res, 200, out);
    } catch (const Error& e) {
      send_error(res, e.code() == Errc::ExternalScorerUnavailable ? 502 : 400, e);
    }
  });

  svr.Get(R"(/sessions/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = find(req.matches[1]);
    if (!session) return send_error(res, 404, "UnknownSession", "no session '" + std::string(req.matches[1]) + "'");
    std::lock_guard lock(session->mutex);
    const Revision& rev = session->revisions.back();
    executor::ExecutorConfig cfg = options_.config.executor_config();
    cfg.floor_height = session->floor_height;
    cfg.seed = session->seed;
    try {
      const auto scene = executor::assemble_scene(rev.program.block, rev.program.buildings, cfg);
      metrics::ReportInput input{session->id + "@" + std::to_string(rev.number), serialize(rev.program.block),
                                 metrics::scene_mesh(scene, metrics::EdgeScope::Shells)};
      Json out = Json::parse(metrics::report_json(metrics::build_report({input})));
      out["session"] = session->id;
      out["revision"] = rev.number;
      send_json(res, 200, out);
    } catch (const Error& e) {
      send_error(res, 422, e);
    }
  });
}

std::string CityService::snapshot_json() const {
  Json sessions = Json::array();
  std::lock_guard lock(sessions_mutex_);
  for (const auto& [id, s] : sessions_) {
    std::lock_guard slock(s->mutex);
    Json revs = Json::array();
    for (const auto& r : s->revisions) {
      Json j = program_json(r.program);
      j["revision"] = r.number;
      j["command"] = r.command;
      revs.push_back(std::move(j));
    }
    sessions.push_back({{"session", id},
                        {"floor_height", s->floor_height},
                        {"seed", s->seed},
                        {"prompt", s->prompt},
                        {"revisions", revs}});
  }
  return Json{{"next_session", next_session_}, {"sessions", sessions}}.dump(2) + "\n";
}

void CityService::restore_snapshot(const std::string& json_text) {
  try {
    const Json root = Json::parse(json_text);
    std::lock_guard lock(sessions_mutex_);
    for (const auto& js : root.at("sessions")) {
      auto s = std::make_shared<Session>();
      s->id = js.at("session").get<std::string>();
      s->floor_height = js.at("floor_height").get<double>();
      s->seed = js.at("seed").get<std::uint64_t>();
      s->prompt = js.value("prompt", std::string());
      for (const auto& jr : js.at("revisions")) {
        std::vector<std::string> notes;
        Revision r;
        r.number = jr.at("revision").get<int>();
        r.program = program_from(jr.at("block"), jr.value("buildings", Json()), notes);
        r.command = jr.value("command", std::string());
        s->revisions.push_back(std::move(r));
      }
      if (s->revisions.empty()) continue;
      sessions_[s->id] = s;
    }
    next_session_ = std::max(next_session_, root.value("next_session", std::uint64_t{1}));
  } catch (const Json::exception& e) {
    throw Error(Errc::BadConfig, std::string("bad snapshot: ") + e.what());
  }
}

void CityService::write_snapshot() const {
  const std::string text = snapshot_json();
  std::ofstream out(options_.snapshot_path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(Errc::IoFailure, "cannot write snapshot " + options_.snapshot_path);
}

}  // namespace cityforge::service
