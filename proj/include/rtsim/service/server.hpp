#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <sstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "rtsim/service/scene.hpp"
#include "rtsim/service/x3d.hpp"

namespace rtsim::service {

inline constexpr const char* kJson = "application/json";
inline constexpr const char* kX3dMime = "model/x3d+xml";
inline constexpr const char* kPlyMime = "application/ply";

inline nlohmann::json error_body(const std::string& type, const std::string& message) {
  return {{"error", {{"type", type}, {"message", message}}}};
}

inline nlohmann::json error_body(const LimitError& e) {
  nlohmann::json j = error_body("limit", e.what());
  j["error"]["joint"] = e.joint();
  j["error"]["requested"] = e.requested();
  j["error"]["min"] = e.min();
  j["error"]["max"] = e.max();
  return j;
}

/// Mutation / collision response: the state and report of one revision.
inline nlohmann::json state_body(const SceneSnapshot& s) {
  return {{"revision", s.revision}, {"state", machine::to_json(s.state)}, {"collision", to_json(s.report)}};
}

/// HTTP front end over one SceneDocument.
class Server {
 public:
  explicit Server(std::shared_ptr<SceneDocument> doc) : doc_(std::move(doc)) {
    if (!doc_) throw Error("server needs a scene document");
    routes();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  /// Binds the listening socket; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? http_.bind_to_any_port(host) : (http_.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  /// Serves until stop(); call bind() first.
  void run() {
    if (!http_.listen_after_bind() && !stopping_) throw Error("server stopped unexpectedly");
  }

  void stop() {
    stopping_ = true;
    if (http_.is_running()) http_.stop();
  }

  void wait_until_ready() const { http_.wait_until_ready(); }
  SceneDocument& document() { return *doc_; }

 private:
  static void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), kJson);
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(std::string("malformed JSON body: ") + ex.what());
    }
  }

  // Wraps a handler so library errors map to machine-readable 4xx bodies.
  template <class F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const LimitError& e) {
        send_json(res, error_body(e), 422);
      } catch (const FormatError& e) {
        send_json(res, error_body("format", e.what()), 400);
      } catch (const GeometryError& e) {
        send_json(res, error_body("geometry", e.what()), 422);
      } catch (const Error& e) {
        send_json(res, error_body("error", e.what()), 400);
      }
    };
  }

  void routes() {
    http_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      send_json(res, error_body("internal", msg), 500);
    });
    http_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.body.empty()) {
        send_json(res, error_body(res.status == 404 ? "not_found" : "http", req.method + " " + req.path), res.status);
      }
    });

    http_.Get("/api/scene", guarded([this](const httplib::Request&, httplib::Response& res) {
                send_json(res, to_json(*doc_->snapshot()));
              }));

    http_.Get("/api/scene/mesh/:component", guarded([this](const httplib::Request& req, httplib::Response& res) {
                const std::string name = req.path_params.at("component");
                const auto snap = doc_->snapshot();
                const machine::Component* c = snap->geometry->find(name);
                if (!c) {
                  send_json(res, error_body("not_found", "unknown component '" + name + "'"), 404);
                  return;
                }
                const std::string accept = req.get_header_value("Accept");
                if (accept.find("x3d") != std::string::npos) {
                  res.set_content(x3d::export_mesh(*c->mesh, name), kX3dMime);
                } else {
                  res.set_content(ply::mesh_to_string(*c->mesh), kPlyMime);
                }
              }));

    http_.Put("/api/machine/joints", guarded([this](const httplib::Request& req, httplib::Response& res) {
                const machine::JointUpdate update = machine::JointUpdate::from_json(parse_body(req));
                send_json(res, state_body(*doc_->set_joints(update)));
              }));

    http_.Post("/api/patient", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::string mesh_bytes;
                 nlohmann::json offset = nlohmann::json::object();
                 if (req.is_multipart_form_data()) {
                   if (!req.has_file("mesh")) throw FormatError("multipart upload needs a 'mesh' part");
                   mesh_bytes = req.get_file_value("mesh").content;
                   if (req.has_file("couch_offset")) {
                     offset = nlohmann::json::parse(req.get_file_value("couch_offset").content, nullptr, false);
                   }
                 } else {
                   mesh_bytes = req.body;
                   if (req.has_param("couch_offset")) {
                     offset = nlohmann::json::parse(req.get_param_value("couch_offset"), nullptr, false);
                   }
                 }
                 if (offset.is_discarded() || !offset.is_object()) throw FormatError("couch_offset must be a JSON object");
                 const RigidTransform mount = machine::transform_from_json(offset);
                 TriMesh mesh = ply::mesh_from_string(mesh_bytes);
                 const auto snap = doc_->set_patient(std::move(mesh), mount);
                 nlohmann::json body = state_body(*snap);
                 body["patient"] = {{"triangles", snap->geometry->find(machine::kPatient)->mesh->triangle_count()},
                                    {"couch_offset", transform_to_json(mount)}};
                 send_json(res, body);
               }));

    http_.Get("/api/collision", guarded([this](const httplib::Request&, httplib::Response& res) {
                const auto snap = doc_->snapshot();
                nlohmann::json body = to_json(snap->report);
                body["revision"] = snap->revision;
                send_json(res, body);
              }));

    http_.Post("/api/sweep", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const nlohmann::json body = parse_body(req);
                 const nlohmann::json& list = body.is_object() && body.contains("states") ? body.at("states") : body;
                 if (!list.is_array()) throw FormatError("sweep body must be a list of joint maps");
                 std::vector<machine::JointUpdate> updates;
                 for (const auto& e : list) updates.push_back(machine::JointUpdate::from_json(e));
                 const auto snap = doc_->snapshot();
                 const auto entries = clearance_sweep(*snap->geometry, snap->state, updates);
                 nlohmann::json results = nlohmann::json::array();
                 for (std::size_t i = 0; i < entries.size(); ++i) {
                   nlohmann::json r = {{"index", i}};
                   if (entries[i].ok()) {
                     r["state"] = machine::to_json(*entries[i].state);
                     r["report"] = to_json(*entries[i].report);
                   } else {
                     r["error"] = entries[i].error;
                   }
                   results.push_back(r);
                 }
                 send_json(res, {{"revision", snap->revision}, {"results", results}});
               }));

    http_.Get("/api/export/x3d", guarded([this](const httplib::Request&, httplib::Response& res) {
                res.set_content(x3d::export_scene(doc_->snapshot()->posed), kX3dMime);
              }));

    http_.Get("/api/events", [this](const httplib::Request&, httplib::Response& res) {
      auto last = std::make_shared<std::optional<std::uint64_t>>();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, last](std::size_t, httplib::DataSink& sink) {
        if (stopping_) return false;
        const auto snap = *last ? doc_->wait_for(**last, std::chrono::milliseconds(200)) : doc_->snapshot();
        if (stopping_) return false;
        std::string chunk;
        if (!*last || snap->revision > **last) {
          const nlohmann::json ev = {{"revision", snap->revision}, {"status", to_string(snap->report.status)}};
          chunk = "data: " + ev.dump() + "\n\n";
          *last = snap->revision;
        } else {
          chunk = ": keep-alive\n\n";
        }
        return sink.write(chunk.data(), chunk.size());
      });
    });
  }

  std::shared_ptr<SceneDocument> doc_;
  httplib::Server http_;
  std::atomic<bool> stopping_{false};
};

}  // namespace rtsim::service
