#pragma once

#include "modernkit/session.hpp"

#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace modernkit {

/// JSON over HTTP for the review console and scripts.
///
///     POST /runs                                  create a run (201)
///     GET  /runs                                  list runs
///     GET  /runs/{id}                             run status
///     POST /runs/{id}/steps/{step}/generate
///     POST /runs/{id}/steps/{step}/review
///     POST /runs/{id}/steps/{step}/repair
///     GET  /runs/{id}/steps/{step}/exchanges      prompts and responses of the last generation
///     GET  /artifacts?tag=&kind=
///     GET  /artifacts/{id}                        version list
///     GET  /artifacts/{id}/{version}              version may be "latest"
///     POST /verify/reverse
///     POST /verify/cross
///     GET  /verifications?artifact_id=
///     GET  /manifest
///
/// Errors come back as {"code", "message", "detail"} with a status derived
/// from the error class.
class HttpService {
 public:
  explicit HttpService(Session& session);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds `host:port` (port 0 picks a free port) and returns the bound port.
  /// Non-loopback hosts are refused unless `allow_remote` is set.
  int bind(const std::string& host, int port, bool allow_remote = false);
  /// Serves until stop() is called. Requires bind().
  bool listen();
  void stop();

 private:
  void install_routes();

  Session& session_;
  std::unique_ptr<httplib::Server> server_;
};

bool is_loopback_host(const std::string& host);

}  // namespace modernkit
