// Copyright 2026 The MeshForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdlib>
#include <functional>
#include <mutex>
#include <regex>
#include <string>
#include <utility>

// Eigen must be seen before httplib: <resolv.h> defines a `_res` macro.
#include "meshforge/pipeline.hpp"
// clang-format off
#include "httplib.h"
// clang-format on

namespace meshforge {

inline constexpr int kDefaultPort = 8765;
inline constexpr std::string_view kPortEnv = "MESHFORGE_PORT";

/// Port from MESHFORGE_PORT, or the default.
inline int PortFromEnvironment() {
  const char* v = std::getenv(std::string(kPortEnv).c_str());
  if (!v || !*v) return kDefaultPort;
  char* end = nullptr;
  long p = std::strtol(v, &end, 10);
  if (*end != '\0' || p < 0 || p > 65535) throw Error(Errc::kConfig, std::string(kPortEnv) + " is not a port: " + v);
  return static_cast<int>(p);
}

/// Flattened mesh for the browser: xyz triples, rgb triples, index triples.
inline Json MeshToViewJson(const TriangleMesh& m, const Pose& pose = Pose::Identity()) {
  Json v = Json::array(), c = Json::array(), f = Json::array();
  for (const auto& p : m.vertices) {
    Vec3 q = Apply(pose, p);
    v.push_back(q.x());
    v.push_back(q.y());
    v.push_back(q.z());
  }
  for (const auto& col : m.colors)
    for (int k = 0; k < 3; ++k) c.push_back(col[k]);
  for (const auto& face : m.faces)
    for (uint32_t i : face) f.push_back(i);
  return Json{{"vertices", v}, {"colors", c}, {"faces", f}};
}

/// Local service behind the correspondence picker. Holds one session over the
/// pipeline's output directory and reads/writes exactly the files the CLI
/// stages use. Mutating requests share one job slot; a request arriving while
/// another job runs is answered with 409.
class Service {
 public:
  explicit Service(PipelineConfig cfg, fs::path static_dir = {}) : cfg_(std::move(cfg)) {
    if (!static_dir.empty() && !server_.set_mount_point("/", static_dir.string()))
      throw Error(Errc::kConfig, "static directory not found: " + static_dir.string());
    Routes();
  }

  httplib::Server& server() { return server_; }
  const PipelineConfig& config() const { return cfg_; }
  /// The job slot; exposed so callers can hold it while inspecting state.
  std::mutex& job_mutex() { return job_; }

  bool Listen(const std::string& host, int port) { return server_.listen(host, port); }
  int BindToAnyPort(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool ListenAfterBind() { return server_.listen_after_bind(); }
  void Stop() { server_.stop(); }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static void Reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void Fail(httplib::Response& res, int status, const std::string& msg) {
    Reply(res, status, Json{{"error", msg}});
  }

  // Maps library errors to 400 and anything else to 500.
  static Handler Guard(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        Fail(res, 400, e.what());
      } catch (const std::exception& e) {
        Fail(res, 500, e.what());
      }
    };
  }

  // Runs `h` in the job slot, or answers 409 when it is taken.
  Handler Job(Handler h) {
    return Guard([this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      std::unique_lock lock(job_, std::try_to_lock);
      if (!lock.owns_lock()) return Fail(res, 409, "a registration job is already running");
      h(req, res);
    });
  }

  static bool ValidId(const std::string& id) {
    static const std::regex kId("[A-Za-z0-9_-]+");
    return std::regex_match(id, kId);
  }

  void Routes() {
    server_.Get("/api/fragments", Guard([this](const httplib::Request&, httplib::Response& res) {
                  Json list = Json::array(), missing = Json::array();
                  for (const auto& b : cfg_.bundles) {
                    const fs::path p = cfg_.Output(ScaledPath(b.id));
                    if (!fs::exists(p)) {
                      missing.push_back(b.id);
                      continue;
                    }
                    const TriangleMesh m = DecodePly(ReadFileBytes(p), p.string()).mesh;
                    list.push_back({{"id", b.id}, {"vertices", m.vertices.size()}, {"faces", m.faces.size()}});
                  }
                  Reply(res, 200, {{"fragments", list}, {"missing", missing}});
                }));

    server_.Get("/api/fragments/:id/mesh", Guard([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.path_params.at("id");
                  if (!ValidId(id) || !cfg_.HasBundle(id)) return Fail(res, 404, "unknown fragment '" + id + "'");
                  const fs::path p = cfg_.Output(ScaledPath(id));
                  if (!fs::exists(p)) return Fail(res, 404, "fragment '" + id + "' has not been scaled yet");
                  res.set_content(ReadFileBytes(p), "application/octet-stream");
                }));

    server_.Post("/api/correspondences", Job([this](const httplib::Request& req, httplib::Response& res) {
                   CorrespondenceSet c = CorrespondencesFromJson(ParseJson(req.body, "request"), "request");
                   if (!cfg_.HasBundle(c.source_id) || !cfg_.HasBundle(c.target_id))
                     return Fail(res, 400, "unknown fragment pair (" + c.source_id + ", " + c.target_id + ")");
                   if (c.source_id == c.target_id) return Fail(res, 400, "source and target must differ");
                   if (c.pairs.size() < 3)
                     return Fail(res, 400,
                                 "the operator selects at least three matching points on each fragment; got " +
                                     std::to_string(c.pairs.size()) + " pair(s)");
                   const fs::path p = cfg_.CorrespondencePath(c.source_id, c.target_id);
                   WriteFileBytes(p, CorrespondencesToJson(c).dump(2) + "\n");
                   Reply(res, 200, {{"source_id", c.source_id}, {"target_id", c.target_id}, {"pairs", c.pairs.size()}});
                 }));

    server_.Post("/api/register", Job([this](const httplib::Request& req, httplib::Response& res) {
                   Json body = ParseJson(req.body, "request");
                   const auto [src, dst] = detail::JsonGuard("request", [&] {
                     return std::pair{body.at("source_id").get<std::string>(), body.at("target_id").get<std::string>()};
                   });
                   RegistrationResult r = RegisterPair(cfg_, src, dst);
                   Reply(res, 200, RegistrationToJson(src, dst, r));
                 }));

    server_.Get("/api/preview", Guard([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string src = req.get_param_value("source"), dst = req.get_param_value("target");
                  if (!cfg_.HasBundle(src) || !cfg_.HasBundle(dst))
                    return Fail(res, 400, "preview needs known ?source= and ?target= fragments");
                  const fs::path rp = cfg_.Output(RegistrationPath(src, dst));
                  if (!fs::exists(rp)) return Fail(res, 404, "pair (" + src + ", " + dst + ") is not registered yet");
                  Json reg = ParseJson(ReadFileBytes(rp), rp.string());
                  const Pose pose = detail::JsonGuard(rp.string(), [&] { return PoseFromJson(reg.at("transform")); });
                  auto mesh = [&](const std::string& id) {
                    const fs::path p = cfg_.Output(ScaledPath(id));
                    return DecodePly(ReadFileBytes(p), p.string()).mesh;
                  };
                  Reply(res, 200,
                        {{"transform", reg.at("transform")},
                         {"rmse", reg.at("rmse")},
                         {"source", MeshToViewJson(mesh(src), pose)},
                         {"target", MeshToViewJson(mesh(dst))}});
                }));

    server_.Post("/api/merge", Job([this](const httplib::Request&, httplib::Response& res) {
                   MergeResult m = RunMerge(cfg_);
                   Reply(res, 200, {{"id", "final"}, {"vertices", m.mesh.vertices.size()}, {"faces", m.mesh.faces.size()}});
                 }));

    server_.Get("/api/result/:id", Guard([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.path_params.at("id");
                  const fs::path p = cfg_.Output(MergedPath(id));
                  if (!ValidId(id) || !fs::exists(p)) return Fail(res, 404, "no result '" + id + "'");
                  res.set_content(ReadFileBytes(p), "application/octet-stream");
                }));
  }

  PipelineConfig cfg_;
  httplib::Server server_;
  std::mutex job_;
};

}  // namespace meshforge
