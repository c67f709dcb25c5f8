#include "modernkit/llm_gateway.hpp"

#include "modernkit/error.hpp"
#include "modernkit/util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>

namespace modernkit {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::OpenAiCompatible: return "openai_compatible";
    case BackendKind::Stub: return "stub";
  }
  return "stub";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) {
  if (name == "openai_compatible") return BackendKind::OpenAiCompatible;
  if (name == "stub") return BackendKind::Stub;
  return std::nullopt;
}

namespace {

bool is_fence_line(std::string_view line) {
  auto t = line;
  while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
  return t.substr(0, 3) == "```";
}

bool is_explanation_heading(std::string_view line) {
  auto t = line;
  while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
  std::size_t hashes = 0;
  while (hashes < t.size() && t[hashes] == '#') ++hashes;
  if (hashes == 0 || hashes > 6) return false;
  t.remove_prefix(hashes);
  if (t.empty() || (t.front() != ' ' && t.front() != '\t')) return false;
  t = util::trim(t);
  while (!t.empty() && t.front() == '*') t.remove_prefix(1);
  return util::starts_with_icase(t, "explanation");
}

std::string strip_artifact(std::string_view s) {
  // Leading blank lines and trailing whitespace go; indentation of the first
  // line stays.
  while (!s.empty()) {
    const auto nl = s.find('\n');
    if (nl == std::string_view::npos || !util::trim(s.substr(0, nl)).empty()) break;
    s.remove_prefix(nl + 1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (util::trim(s).empty()) return {};
  return std::string(s);
}

bool retryable(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Timeout:
    case ErrorCode::IncompleteResponse:
      return true;
    case ErrorCode::BackendError: {
      const auto& d = e.detail();
      const int status = d.is_object() && d.contains("status") && d["status"].is_number_integer() ? d["status"].get<int>() : 0;
      return status == 0 || status == 408 || status == 429 || status >= 500;
    }
    default:
      return false;
  }
}

nlohmann::json error_json(const Error& e) {
  nlohmann::json j = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (e.detail().is_object() && e.detail().contains("empty")) j["empty"] = e.detail()["empty"];
  return j;
}

}  // namespace

bool is_incomplete_response(std::string_view response) {
  if (util::trim(response).empty()) return true;
  bool open = false;
  for (const auto& line : util::split_lines(response)) {
    if (is_fence_line(line)) open = !open;
  }
  return open;
}

SplitResponse split_explanation(std::string_view response) {
  const auto lines = util::split_lines(response);
  bool in_fence = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_fence_line(lines[i])) {
      in_fence = !in_fence;
      continue;
    }
    if (!in_fence && is_explanation_heading(lines[i])) {
      const std::vector<std::string> head(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(i));
      const std::vector<std::string> tail(lines.begin() + static_cast<std::ptrdiff_t>(i) + 1, lines.end());
      return {strip_artifact(util::join(head, "\n")), std::string(util::trim(util::join(tail, "\n")))};
    }
  }
  return {strip_artifact(response), {}};
}

// ---------------------------------------------------------------------------

void LlmGateway::set_allowed_hosts(std::vector<std::string> hosts) {
  std::lock_guard lock(mutex_);
  for (auto& h : hosts) h = util::to_lower(h);
  allowed_hosts_ = std::move(hosts);
}

void LlmGateway::insert(const std::string& backend_id, Entry e) {
  if (backend_id.empty()) throw Error(ErrorCode::InvalidArgument, "backend id must not be empty");
  if (e.max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must not be negative");
  if (e.timeout_seconds <= 0) throw Error(ErrorCode::InvalidArgument, "timeout_seconds must be positive");
  std::lock_guard lock(mutex_);
  if (backends_.count(backend_id)) {
    throw Error(ErrorCode::DuplicateBackend, "backend '" + backend_id + "' is already registered",
                {{"backend_id", backend_id}});
  }
  backends_.emplace(backend_id, std::move(e));
}

void LlmGateway::register_backend(const std::string& backend_id, const BackendSettings& settings) {
  {
    std::lock_guard lock(mutex_);
    if (backends_.count(backend_id)) {
      throw Error(ErrorCode::DuplicateBackend, "backend '" + backend_id + "' is already registered",
                  {{"backend_id", backend_id}});
    }
  }
  std::unique_ptr<Backend> backend;
  if (settings.kind == BackendKind::Stub) {
    try {
      backend = StubBackend::from_file(settings.endpoint);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidEndpoint, "stub transcript for '" + backend_id + "': " + e.what(),
                  {{"backend_id", backend_id}, {"endpoint", settings.endpoint}});
    }
  } else {
    ParsedUrl url;
    try {
      url = parse_endpoint_url(settings.endpoint);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidEndpoint, e.what(), {{"backend_id", backend_id}, {"endpoint", settings.endpoint}});
    }
    {
      std::lock_guard lock(mutex_);
      if (!allowed_hosts_.empty() &&
          std::find(allowed_hosts_.begin(), allowed_hosts_.end(), util::to_lower(url.host)) == allowed_hosts_.end()) {
        throw Error(ErrorCode::InvalidEndpoint, "host '" + url.host + "' is not in the allowed host set",
                    {{"backend_id", backend_id}, {"endpoint", settings.endpoint}});
      }
    }
    std::string key;
    if (!settings.api_key_env.empty()) {
      if (const char* v = std::getenv(settings.api_key_env.c_str())) key = v;
    }
    backend = std::make_unique<OpenAiCompatibleBackend>(settings.endpoint, settings.model, key);
  }
  insert(backend_id, Entry{std::move(backend), settings.max_retries, settings.timeout_seconds});
}

void LlmGateway::register_backend(const std::string& backend_id, std::unique_ptr<Backend> backend, int max_retries,
                                  int timeout_seconds) {
  if (!backend) throw Error(ErrorCode::InvalidArgument, "backend must not be null");
  insert(backend_id, Entry{std::move(backend), max_retries, timeout_seconds});
}

bool LlmGateway::has_backend(std::string_view backend_id) const {
  std::lock_guard lock(mutex_);
  return backends_.find(backend_id) != backends_.end();
}

std::vector<std::string> LlmGateway::backend_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, e] : backends_) ids.push_back(id);
  return ids;
}

const LlmGateway::Entry& LlmGateway::entry(std::string_view backend_id) const {
  std::lock_guard lock(mutex_);
  const auto it = backends_.find(backend_id);
  if (it == backends_.end()) {
    throw Error(ErrorCode::UnknownBackend, "unknown backend '" + std::string(backend_id) + "'",
                {{"backend_id", std::string(backend_id)}});
  }
  return it->second;
}

int LlmGateway::max_retries(std::string_view backend_id) const { return entry(backend_id).max_retries; }
int LlmGateway::timeout_seconds(std::string_view backend_id) const { return entry(backend_id).timeout_seconds; }

CompletionResult LlmGateway::complete(const CompletionRequest& request) const {
  if (request.prompt.empty()) throw Error(ErrorCode::InvalidArgument, "prompt must not be empty");
  if (!(request.temperature >= 0.0 && request.temperature <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must be within [0, 1]");
  }
  if (request.max_output_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
  if (request.timeout_seconds <= 0) throw Error(ErrorCode::InvalidArgument, "timeout_seconds must be positive");

  const Entry& e = entry(request.backend_id);
  const auto started = std::chrono::steady_clock::now();
  const BackendCall call{request.prompt, request.temperature, request.max_output_tokens, request.timeout_seconds};

  nlohmann::json last_error;
  const int max_attempts = 1 + e.max_retries;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    try {
      const std::string raw = e.backend->send(call);
      if (is_incomplete_response(raw)) {
        const bool blank = util::trim(raw).empty();
        throw Error(ErrorCode::IncompleteResponse, blank ? "empty response" : "response ends inside a code fence",
                    {{"empty", blank}});
      }
      auto split = split_explanation(raw);
      if (split.text.empty()) throw Error(ErrorCode::IncompleteResponse, "response has no artifact before the explanation");

      CompletionResult result;
      result.text = std::move(split.text);
      result.explanation = std::move(split.explanation);
      result.attempts = attempt;
      result.backend_id = request.backend_id;
      result.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();
      return result;
    } catch (const Error& err) {
      if (!retryable(err)) throw;
      last_error = error_json(err);
    }
  }
  throw Error(ErrorCode::ExhaustedRetries,
              "backend '" + request.backend_id + "' failed after " + std::to_string(max_attempts) +
                  " attempt(s): " + last_error.value("message", std::string()),
              {{"backend_id", request.backend_id}, {"attempts", max_attempts}, {"last_error", last_error}});
}

// ---------------------------------------------------------------------------
// Stub backend

std::vector<StubRecord> parse_transcript(std::string_view text, std::string_view origin) {
  std::vector<StubRecord> records;
  std::vector<std::vector<std::string>> groups(1);
  for (auto& line : util::split_lines(text)) {
    if (line == "===") {
      groups.emplace_back();
    } else {
      groups.back().push_back(std::move(line));
    }
  }

  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& lines = groups[g];
    // A trailing separator or blank group is not a record.
    if (std::all_of(lines.begin(), lines.end(), [](const std::string& l) { return util::trim(l).empty(); })) continue;

    std::size_t i = 0;
    while (i < lines.size() && util::trim(lines[i]).empty()) ++i;  // blank lines after a separator

    StubRecord rec;
    for (; i < lines.size(); ++i) {
      const std::string_view line = lines[i];
      const auto field = [&](std::string_view key) -> std::optional<std::string_view> {
        if (line.substr(0, key.size()) != key) return std::nullopt;
        return util::trim(line.substr(key.size()));
      };
      if (auto v = field("match:")) {
        rec.match = std::string(*v);
      } else if (auto v = field("fail_count:")) {
        int n = 0;
        const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
        if (ec != std::errc{} || ptr != v->data() + v->size() || n < 0) {
          throw Error(ErrorCode::InvalidConfig, std::string(origin) + ": record " + std::to_string(g + 1) +
                                                    ": fail_count must be a non-negative integer");
        }
        rec.fail_count = n;
      } else if (auto v = field("fail_mode:")) {
        if (*v == "error") rec.fail_mode = StubFailMode::Error;
        else if (*v == "empty") rec.fail_mode = StubFailMode::Empty;
        else if (*v == "unclosed_fence") rec.fail_mode = StubFailMode::UnclosedFence;
        else if (*v == "timeout") rec.fail_mode = StubFailMode::Timeout;
        else {
          throw Error(ErrorCode::InvalidConfig,
                      std::string(origin) + ": record " + std::to_string(g + 1) + ": unknown fail_mode");
        }
      } else {
        break;
      }
    }
    if (i < lines.size() && util::trim(lines[i]).empty()) ++i;
    const std::vector<std::string> body(lines.begin() + static_cast<std::ptrdiff_t>(i), lines.end());
    rec.response = util::join(body, "\n");
    while (!rec.response.empty() && rec.response.back() == '\n') rec.response.pop_back();
    records.push_back(std::move(rec));
  }
  return records;
}

StubBackend::StubBackend(std::vector<StubRecord> records) {
  for (auto& r : records) {
    State s;
    s.failures_left = r.fail_count;
    s.record = std::move(r);
    states_.push_back(std::move(s));
  }
}

std::unique_ptr<StubBackend> StubBackend::from_file(const std::filesystem::path& path) {
  return std::make_unique<StubBackend>(parse_transcript(util::read_file(path), path.string()));
}

std::string StubBackend::send(const BackendCall& call) {
  std::lock_guard lock(mutex_);
  received_.emplace_back(call.prompt);

  std::vector<std::size_t> matching;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (call.prompt.find(states_[i].record.match) != std::string_view::npos) matching.push_back(i);
  }
  if (matching.empty()) {
    throw Error(ErrorCode::BackendError, "stub transcript has no record matching the prompt", {{"status", 404}});
  }
  std::size_t pick = matching.back();
  for (auto idx : matching) {
    if (!states_[idx].spent) {
      pick = idx;
      break;
    }
  }
  auto& st = states_[pick];
  if (st.failures_left > 0) {
    --st.failures_left;
    switch (st.record.fail_mode) {
      case StubFailMode::Error:
        throw Error(ErrorCode::BackendError, "scripted stub failure", {{"status", 503}});
      case StubFailMode::Timeout:
        throw Error(ErrorCode::Timeout, "scripted stub timeout");
      case StubFailMode::Empty:
        return {};
      case StubFailMode::UnclosedFence: {
        auto cut = st.record.response.substr(0, st.record.response.size() / 2);
        if (!is_incomplete_response(cut)) cut += "\n```\n";
        return cut;
      }
    }
  }
  if (pick != matching.back()) st.spent = true;
  return st.record.response;
}

std::vector<std::string> StubBackend::received() const {
  std::lock_guard lock(mutex_);
  return received_;
}

// ---------------------------------------------------------------------------
// OpenAI-compatible backend

ParsedUrl parse_endpoint_url(std::string_view url) {
  const auto bad = [&](const std::string& why) {
    return Error(ErrorCode::InvalidEndpoint, "invalid endpoint '" + std::string(url) + "': " + why);
  };
  ParsedUrl out;
  const auto sep = url.find("://");
  if (sep == std::string_view::npos) throw bad("missing scheme");
  out.scheme = util::to_lower(url.substr(0, sep));
  if (out.scheme != "http" && out.scheme != "https") throw bad("scheme must be http or https");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (out.scheme == "https") throw bad("https support is not compiled in");
#endif
  auto rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  out.base_path = slash == std::string_view::npos ? "" : std::string(rest.substr(slash));
  while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
  if (authority.find('@') != std::string_view::npos) throw bad("credentials in the URL are not supported");

  std::string_view host = authority;
  std::string_view port;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) throw bad("unterminated IPv6 literal");
    host = authority.substr(1, close - 1);
    if (close + 1 < authority.size()) {
      if (authority[close + 1] != ':') throw bad("malformed authority");
      port = authority.substr(close + 2);
    }
  } else if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    port = authority.substr(colon + 1);
  }
  if (host.empty()) throw bad("missing host");
  out.host = std::string(host);
  if (port.empty()) {
    out.port = out.scheme == "https" ? 443 : 80;
  } else {
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), out.port);
    if (ec != std::errc{} || ptr != port.data() + port.size() || out.port <= 0 || out.port > 65535) {
      throw bad("invalid port");
    }
  }
  return out;
}

OpenAiCompatibleBackend::OpenAiCompatibleBackend(std::string endpoint, std::string model, std::string api_key)
    : url_(parse_endpoint_url(endpoint)), endpoint_(std::move(endpoint)), model_(std::move(model)),
      api_key_(std::move(api_key)) {}

std::string OpenAiCompatibleBackend::send(const BackendCall& call) {
  const std::string origin = url_.scheme + "://" + (url_.host.find(':') != std::string::npos ? "[" + url_.host + "]" : url_.host) +
                             ":" + std::to_string(url_.port);
  httplib::Client cli(origin);
  cli.set_follow_location(false);
  cli.set_connection_timeout(std::min(call.timeout_seconds, 10), 0);
  cli.set_read_timeout(call.timeout_seconds, 0);
  cli.set_write_timeout(call.timeout_seconds, 0);

  nlohmann::json body;
  if (!model_.empty()) body["model"] = model_;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", std::string(call.prompt)}}});
  body["temperature"] = call.temperature;
  body["max_tokens"] = call.max_output_tokens;
  body["stream"] = false;

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto started = std::chrono::steady_clock::now();
  auto res = cli.Post(url_.base_path + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) {
    const auto elapsed = std::chrono::steady_clock::now() - started;
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || elapsed >= std::chrono::seconds(call.timeout_seconds)) {
      throw Error(ErrorCode::Timeout, "request to " + endpoint_ + " timed out", {{"endpoint", endpoint_}});
    }
    throw Error(ErrorCode::BackendError, "request to " + endpoint_ + " failed: " + httplib::to_string(err),
                {{"status", 0}, {"endpoint", endpoint_}});
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::BackendError,
                "backend returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                {{"status", res->status}, {"endpoint", endpoint_}});
  }
  const auto json = nlohmann::json::parse(res->body, nullptr, false);
  if (json.is_discarded() || !json.contains("choices") || !json["choices"].is_array() || json["choices"].empty()) {
    throw Error(ErrorCode::IncompleteResponse, "malformed chat completion response");
  }
  const auto& choice = json["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object() ||
      !choice["message"].contains("content") || !choice["message"]["content"].is_string()) {
    throw Error(ErrorCode::IncompleteResponse, "chat completion response has no message content");
  }
  return choice["message"]["content"].get<std::string>();
}

}  // namespace modernkit
