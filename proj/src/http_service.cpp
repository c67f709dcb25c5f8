#include "modernkit/http_service.hpp"

#include "modernkit/error.hpp"
#include "modernkit/serialization.hpp"

#include <httplib.h>

#include <algorithm>

namespace modernkit {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.code()),
            {{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}});
}

json body_of(const httplib::Request& req) {
  if (util::trim(req.body).empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
  }
  return j;
}

template <typename T>
std::optional<T> opt(const json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  try {
    return body[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' has the wrong type", {{"field", key}});
  }
}

template <typename T>
T required(const json& body, const char* key) {
  auto v = opt<T>(body, key);
  if (!v) throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' is required", {{"field", key}});
  return *v;
}

StepKind step_param(const std::string& name) {
  const auto step = parse_step(name);
  if (!step) throw Error(ErrorCode::UnknownStep, "unknown step '" + name + "'", {{"step", name}});
  return *step;
}

std::optional<SimilarityMetric> metric_field(const json& body) {
  const auto name = opt<std::string>(body, "metric");
  if (!name) return std::nullopt;
  const auto m = parse_metric(*name);
  if (!m) throw Error(ErrorCode::InvalidArgument, "unknown metric '" + *name + "'", {{"metric", *name}});
  return m;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
    try {
      inner(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(ErrorCode::InvalidArgument, e.what()));
    } catch (const std::exception& e) {
      send_error(res, Error(ErrorCode::IoError, e.what()));
    }
  };
}

}  // namespace

bool is_loopback_host(const std::string& host) {
  return host == "localhost" || host == "::1" || host.rfind("127.", 0) == 0;
}

HttpService::HttpService(Session& session) : session_(session), server_(std::make_unique<httplib::Server>()) {
  int timeout = 0;
  for (const auto& id : session_.gateway().backend_ids()) {
    timeout = std::max(timeout, session_.gateway().timeout_seconds(id) * (1 + session_.gateway().max_retries(id)));
  }
  if (timeout > 0) {
    server_->set_read_timeout(timeout, 0);
    server_->set_write_timeout(timeout, 0);
  }
  install_routes();
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port, bool allow_remote) {
  if (!allow_remote && !is_loopback_host(host)) {
    throw Error(ErrorCode::InvalidArgument, "refusing to bind non-loopback host '" + host + "' without --allow-remote",
                {{"host", host}});
  }
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

bool HttpService::listen() { return server_->listen_after_bind(); }

void HttpService::stop() {
  if (server_) server_->stop();
}

void HttpService::install_routes() {
  auto& s = *server_;
  Session& session = session_;

  s.Post("/runs", guarded([&session](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    const auto phase_name = required<std::string>(body, "phase");
    const auto phase = parse_phase(phase_name);
    if (!phase) throw Error(ErrorCode::InvalidArgument, "unknown phase '" + phase_name + "'", {{"phase", phase_name}});
    RunSourceInput input;
    input.module_tag = opt<std::string>(body, "module_tag").value_or("");
    if (*phase == PhaseKind::RequirementsExtraction) {
      input.manifest = session.manifest();
    } else {
      json source = body.contains("source") ? body["source"] : json::object();
      if (!source.is_object()) throw Error(ErrorCode::InvalidArgument, "field 'source' must be an object");
      input.artifact_id = opt<std::string>(source, "artifact_id");
      input.artifact_version = opt<int>(source, "version");
    }
    send_json(res, 201, session.engine().create_run(*phase, input));
  }));

  s.Get("/runs", guarded([&session](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, session.engine().list_runs());
  }));

  s.Get(R"(/runs/([^/]+))", guarded([&session](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, session.engine().run_status(req.matches[1]));
  }));

  s.Post(R"(/runs/([^/]+)/steps/([^/]+)/generate)",
         guarded([&session](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_of(req);
           GenerateOptions options;
           options.backend_id = opt<std::string>(body, "backend_id");
           options.operator_notes = opt<std::string>(body, "operator_notes").value_or("");
           const auto artifact = session.engine().generate_step(req.matches[1], step_param(req.matches[2]), options);
           send_json(res, 200, {{"run", session.engine().run_status(req.matches[1])}, {"artifact", artifact}});
         }));

  s.Post(R"(/runs/([^/]+)/steps/([^/]+)/review)",
         guarded([&session](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_of(req);
           ReviewDecision d;
           d.run_id = req.matches[1];
           d.step = step_param(req.matches[2]);
           const auto verdict_name = required<std::string>(body, "verdict");
           const auto verdict = parse_verdict(verdict_name);
           if (!verdict) {
             throw Error(ErrorCode::InvalidDecision, "unknown verdict '" + verdict_name + "'", {{"verdict", verdict_name}});
           }
           d.verdict = *verdict;
           d.edited_content = opt<std::string>(body, "edited_content");
           d.reviewer = opt<std::string>(body, "reviewer").value_or("");
           d.note = opt<std::string>(body, "note");
           session.engine().submit_review(d);
           send_json(res, 200, session.engine().run_status(d.run_id));
         }));

  s.Post(R"(/runs/([^/]+)/steps/([^/]+)/repair)",
         guarded([&session](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_of(req);
           const auto artifact = session.engine().repair_artifact(req.matches[1], step_param(req.matches[2]),
                                                                  opt<std::string>(body, "backend_id"));
           send_json(res, 200, {{"run", session.engine().run_status(req.matches[1])}, {"artifact", artifact}});
         }));

  s.Get(R"(/runs/([^/]+)/steps/([^/]+)/exchanges)",
        guarded([&session](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, session.engine().step_exchanges(req.matches[1], step_param(req.matches[2])));
        }));

  s.Get("/artifacts", guarded([&session](const httplib::Request& req, httplib::Response& res) {
    ArtifactFilter filter;
    if (req.has_param("tag")) filter.module_tag = req.get_param_value("tag");
    if (req.has_param("kind")) {
      const auto name = req.get_param_value("kind");
      filter.kind = parse_artifact_kind(name);
      if (!filter.kind) throw Error(ErrorCode::InvalidArgument, "unknown artifact kind '" + name + "'", {{"kind", name}});
    }
    send_json(res, 200, session.workspace().list_artifacts(filter));
  }));

  s.Get(R"(/artifacts/([^/]+))", guarded([&session](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto versions = session.workspace().versions(id);
    if (versions.empty()) throw Error(ErrorCode::UnknownArtifact, "unknown artifact '" + id + "'", {{"artifact_id", id}});
    send_json(res, 200, {{"artifact_id", id}, {"versions", versions}});
  }));

  s.Get(R"(/artifacts/([^/]+)/([^/]+))", guarded([&session](const httplib::Request& req, httplib::Response& res) {
    const std::string version = req.matches[2];
    std::optional<int> v;
    if (version != "latest") {
      try {
        std::size_t used = 0;
        v = std::stoi(version, &used);
        if (used != version.size()) throw std::invalid_argument(version);
      } catch (const std::exception&) {
        throw Error(ErrorCode::UnknownVersion, "invalid version '" + version + "'", {{"version", version}});
      }
    }
    send_json(res, 200, session.workspace().load_artifact(std::string(req.matches[1]), v));
  }));

  s.Post("/verify/reverse", guarded([&session](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    Verifier::Options options;
    options.backend_id = opt<std::string>(body, "backend_id");
    options.threshold = opt<double>(body, "threshold");
    options.metric = metric_field(body);
    const auto record = session.verifier().reverse_verify(required<std::string>(body, "artifact_id"),
                                                          opt<int>(body, "version"),
                                                          required<std::string>(body, "original_requirements"), options);
    send_json(res, 200, record);
  }));

  s.Post("/verify/cross", guarded([&session](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    Verifier::Options options;
    options.backend_id = opt<std::string>(body, "backend_id");
    options.threshold = opt<double>(body, "threshold");
    options.metric = metric_field(body);
    const auto record = session.verifier().cross_model_verify(required<std::string>(body, "run_id"),
                                                              step_param(required<std::string>(body, "step")), options);
    send_json(res, 200, record);
  }));

  s.Get("/verifications", guarded([&session](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> id;
    if (req.has_param("artifact_id")) id = req.get_param_value("artifact_id");
    send_json(res, 200, session.verifier().list_records(id));
  }));

  s.Get("/manifest", guarded([&session](const httplib::Request&, httplib::Response& res) {
    const auto manifest = session.manifest();
    if (!manifest) throw Error(ErrorCode::NotFound, "no repository has been scanned into this workspace");
    send_json(res, 200, manifest_summary(*manifest));
  }));

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_error(res, Error(ErrorCode::NotFound, "no route for " + req.method + " " + req.path));
    }
  });
}

}  // namespace modernkit
