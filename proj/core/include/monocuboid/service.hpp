#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "monocuboid/priors.hpp"
#include "monocuboid/solver.hpp"

namespace monocuboid {

struct HttpResponse {
  int status = 200;
  std::string body;  // application/json
};

// Handlers of the HTTP facade, callable without a socket. Solving is pure;
// the only shared state is the prior table, replaced as a whole on reload.
class SolveService {
 public:
  explicit SolveService(PriorTable priors, std::filesystem::path priors_path = {},
                        SolverConfig defaults = {});

  // Body: {camera, annotations, prototype_class?, id?, feature_scale?,
  //        config?: {gauge?, lambda?, lambda_pixel?, finetune?}}.
  // 200 with pose, 200 without pose when under-constrained, 400 on schema
  // errors, 422 when the solver cannot place the cuboid.
  HttpResponse solve(std::string_view body) const;

  HttpResponse priors() const;
  HttpResponse health() const;

  // Empty body reloads the file the service was started with; {"path": p}
  // loads p; a full prior table document is taken as is.
  HttpResponse reload_priors(std::string_view body);

  std::shared_ptr<const PriorTable> table() const;

  // Blocks serving HTTP on host:port until stop(). cors_origin is sent as
  // Access-Control-Allow-Origin on every response. on_listening runs once
  // the socket is bound, with the bound port (useful with port 0).
  void serve(const std::string& host, int port, const std::string& cors_origin = "*",
             const std::function<void(int)>& on_listening = {});
  void stop();

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const PriorTable> table_;
  std::filesystem::path priors_path_;
  SolverConfig defaults_;
  void* server_ = nullptr;  // the running httplib::Server, guarded by mutex_
};

// Port from TOOSI_PORT when set and valid, else fallback.
int port_from_env(int fallback);

}  // namespace monocuboid
