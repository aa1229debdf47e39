#include "monocuboid/service.hpp"

#include <httplib.h>

#include <cstdlib>
#include <optional>

#include "json_codec.hpp"
#include "monocuboid/constraints.hpp"
#include "monocuboid/error.hpp"

namespace monocuboid {

using codec::json;

namespace {

HttpResponse reply(int status, const json& body) { return {status, body.dump() + "\n"}; }

HttpResponse error_reply(int status, const std::string& message) {
  return reply(status, {{"error", message}});
}

SolverConfig config_from_json(const json& body, SolverConfig config) {
  if (!body.contains("config")) return config;
  const auto& c = body["config"];
  if (!c.is_object()) codec::fail("/config", "expected an object");
  if (c.contains("gauge")) {
    std::string name = codec::string(c["gauge"], "/config/gauge");
    auto g = parse_gauge(name);
    if (!g) codec::fail("/config/gauge", "unknown gauge '" + name + "'");
    config.gauge = *g;
  }
  if (c.contains("lambda")) config.lambda_prior = codec::number(c["lambda"], "/config/lambda");
  if (c.contains("lambda_pixel")) {
    config.lambda_pixel = codec::number(c["lambda_pixel"], "/config/lambda_pixel");
  }
  if (c.contains("finetune")) {
    if (!c["finetune"].is_boolean()) codec::fail("/config/finetune", "expected a boolean");
    config.finetune = c["finetune"].get<bool>();
  }
  return config;
}

json wireframe(const CuboidPose& pose, const CameraIntrinsics& cam) {
  json corners = json::array();
  for (const Vec3& X : cuboid_corners(pose)) {
    if (X.z() <= 1e-9) {
      corners.push_back(nullptr);  // behind the camera, nothing to draw
    } else {
      Vec2 px = project(X, cam);
      corners.push_back({codec::num(px.x()), codec::num(px.y())});
    }
  }
  json edges = json::array();
  for (const auto& e : cuboid_edges()) edges.push_back({e[0], e[1]});
  return {{"corners", corners}, {"edges", edges}};
}

}  // namespace

SolveService::SolveService(PriorTable priors, std::filesystem::path priors_path, SolverConfig defaults)
    : table_(std::make_shared<const PriorTable>(std::move(priors))),
      priors_path_(std::move(priors_path)),
      defaults_(std::move(defaults)) {}

std::shared_ptr<const PriorTable> SolveService::table() const {
  std::lock_guard lock(mutex_);
  return table_;
}

HttpResponse SolveService::solve(std::string_view body_text) const {
  json body;
  SolverConfig config;
  CameraIntrinsics cam;
  VehicleEntry entry;
  try {
    body = codec::parse(body_text, "request body");
    if (!body.is_object()) codec::fail("", "expected an object");
    const auto& c = codec::require(body, "", "camera");
    if (!c.is_object()) codec::fail("/camera", "camera must be given inline");
    cam = codec::camera_from_json(c, "/camera");
    entry = codec::vehicle_from_json(body, "");
    config = config_from_json(body, defaults_);
  } catch (const InvalidInput& e) {
    return error_reply(400, e.what());
  }

  const bool prior_active = config.gauge == Gauge::Prior;
  std::optional<SizePrior> prior;
  auto table = this->table();
  if (prior_active) {
    try {
      prior = table->lookup(entry.vehicle.prototype_class);
    } catch (const Error& e) {
      return error_reply(400, std::string("no size prior available: ") + e.what());
    }
  }
  try {
    config.validate(prior_active);
  } catch (const InvalidInput& e) {
    return error_reply(400, e.what());
  }

  json out = {{"gauge", std::string(to_string(config.gauge))},
              {"converged", false},
              {"cost_pixel", nullptr},
              {"per_point_residuals_px", json::array()},
              {"projected_wireframe_px", nullptr}};
  if (prior) out["prototype_class"] = prior->class_name;

  DofReport dof;
  dof.dof_needed = prior_active ? 9 : 8;
  if (entry.vehicle.annotations.empty()) {
    out["dof"] = codec::dof_to_json(dof);
    out["status"] = "under-constrained";
    return reply(200, out);
  }
  ConstraintSystem sys;
  try {
    sys = compile(entry.vehicle.annotations, cam);
  } catch (const InvalidInput& e) {
    return error_reply(400, e.what());
  }
  dof = dof_report(sys, prior_active);
  out["dof"] = codec::dof_to_json(dof);
  if (dof.status == DofStatus::UnderConstrained) {
    out["status"] = "under-constrained";
    return reply(200, out);
  }

  SolveResult res;
  try {
    res = monocuboid::solve(entry.vehicle, cam, prior ? &*prior : nullptr, config);
  } catch (const UnderConstrained& e) {
    out["status"] = "under-constrained";
    out["diagnostic"] = e.what();
    return reply(200, out);
  } catch (const InvalidInput& e) {
    return error_reply(400, e.what());
  } catch (const Error& e) {
    json err = {{"error", e.what()}, {"dof", out["dof"]}, {"status", "failed"}};
    return reply(422, err);
  }

  json residuals = json::array();
  for (std::size_t i = 0; i < sys.rows.size() && i < res.per_point_residuals_px.size(); ++i) {
    residuals.push_back({{"annotation", sys.rows[i].annotation_index},
                         {"point", sys.rows[i].point_index},
                         {"label", std::string(to_string(sys.rows[i].label))},
                         {"px", codec::num(res.per_point_residuals_px[i])}});
  }
  out["status"] = "solved";
  out["pose"] = codec::pose_to_json(res.pose);
  out["projected_wireframe_px"] = wireframe(res.pose, cam);
  out["per_point_residuals_px"] = residuals;
  out["cost_pixel"] = codec::num(res.cost_pixel);
  out["converged"] = res.converged;
  return reply(200, out);
}

HttpResponse SolveService::priors() const {
  auto table = this->table();
  json classes = json::array();
  for (const auto& c : table->classes()) {
    classes.push_back({{"name", c.class_name}, {"mu", codec::vec(c.mu)}, {"n_samples", c.n_samples}});
  }
  return reply(200, {{"version", PriorTable::kVersion}, {"classes", classes}});
}

HttpResponse SolveService::health() const { return reply(200, {{"status", "ok"}}); }

HttpResponse SolveService::reload_priors(std::string_view body_text) {
  PriorTable fresh;
  std::filesystem::path source = priors_path_;
  try {
    bool blank = body_text.find_first_not_of(" \t\r\n") == std::string_view::npos;
    if (!blank) {
      json body = codec::parse(body_text, "request body");
      if (!body.is_object()) codec::fail("", "expected an object");
      if (body.contains("path")) {
        source = codec::string(body["path"], "/path");
      } else {
        source.clear();
        fresh = PriorTable::from_json(body_text);
      }
    }
    if (!source.empty()) {
      fresh = PriorTable::load(source);
    } else if (blank) {
      codec::fail("", "no prior file configured; send {\"path\": ...} or a prior table");
    }
  } catch (const InvalidInput& e) {
    return error_reply(400, e.what());
  }
  auto next = std::make_shared<const PriorTable>(std::move(fresh));
  const auto n = next->classes().size();
  {
    std::lock_guard lock(mutex_);
    table_ = std::move(next);
  }
  return reply(200, {{"status", "ok"}, {"classes", n}});
}

void SolveService::serve(const std::string& host, int port, const std::string& cors_origin,
                         const std::function<void(int)>& on_listening) {
  httplib::Server server;
  server.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Post("/solve", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, solve(req.body));
  });
  server.Get("/priors", [&](const httplib::Request&, httplib::Response& res) { send(res, priors()); });
  server.Get("/health", [&](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server.Post("/priors/reload", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, reload_priors(req.body));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 422;
    res.set_content(json{{"error", what}}.dump() + "\n", "application/json");
  });
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw InvalidInput("cannot listen on " + host + ":" + std::to_string(port));
  {
    std::lock_guard lock(mutex_);
    server_ = &server;
  }
  if (on_listening) on_listening(bound);
  server.listen_after_bind();
  std::lock_guard lock(mutex_);
  server_ = nullptr;
}

void SolveService::stop() {
  std::lock_guard lock(mutex_);
  if (server_) static_cast<httplib::Server*>(server_)->stop();
}

int port_from_env(int fallback) {
  const char* v = std::getenv("TOOSI_PORT");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  long p = std::strtol(v, &end, 10);
  if (*end != '\0' || p <= 0 || p > 65535) return fallback;
  return static_cast<int>(p);
}

}  // namespace monocuboid
