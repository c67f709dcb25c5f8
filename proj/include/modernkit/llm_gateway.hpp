#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modernkit {

inline constexpr double kDefaultTemperature = 0.2;
inline constexpr int kDefaultMaxRetries = 2;

struct CompletionRequest {
  std::string prompt;
  std::string backend_id;
  double temperature = kDefaultTemperature;
  int max_output_tokens = 4096;
  int timeout_seconds = 120;
};

struct CompletionResult {
  std::string text;         // artifact part of the response
  std::string explanation;  // text after the first "Explanation" heading, or empty
  int attempts = 0;
  std::string backend_id;
  std::int64_t duration_ms = 0;
};

/// What a backend receives for one attempt.
struct BackendCall {
  std::string_view prompt;
  double temperature = kDefaultTemperature;
  int max_output_tokens = 4096;
  int timeout_seconds = 120;
};

/// Transport to one model. Implementations return the raw response text, or
/// throw Error with code Timeout or BackendError (detail.status carries the
/// HTTP status, 0 for connection failures).
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string send(const BackendCall& call) = 0;
};

enum class BackendKind { OpenAiCompatible, Stub };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view name);

struct BackendSettings {
  BackendKind kind = BackendKind::Stub;
  std::string endpoint;  // base URL (openai_compatible) or transcript path (stub)
  std::string model;
  int max_retries = kDefaultMaxRetries;
  int timeout_seconds = 120;
  std::string api_key_env;  // environment variable holding a bearer token, optional
};

/// A response is incomplete when it is blank or ends inside a ``` fence.
bool is_incomplete_response(std::string_view response);

struct SplitResponse {
  std::string text;
  std::string explanation;
};

/// Splits at the first markdown heading (outside code fences) whose title
/// starts with "Explanation", case-insensitively.
SplitResponse split_explanation(std::string_view response);

/// Routes completion requests to registered backends and retries failed or
/// incomplete responses with the identical request.
class LlmGateway {
 public:
  LlmGateway() = default;
  LlmGateway(const LlmGateway&) = delete;
  LlmGateway& operator=(const LlmGateway&) = delete;

  /// Restricts openai_compatible endpoints to these hosts; empty allows any.
  void set_allowed_hosts(std::vector<std::string> hosts);

  void register_backend(const std::string& backend_id, const BackendSettings& settings);
  void register_backend(const std::string& backend_id, std::unique_ptr<Backend> backend,
                        int max_retries = kDefaultMaxRetries, int timeout_seconds = 120);

  bool has_backend(std::string_view backend_id) const;
  std::vector<std::string> backend_ids() const;
  int max_retries(std::string_view backend_id) const;
  int timeout_seconds(std::string_view backend_id) const;

  CompletionResult complete(const CompletionRequest& request) const;

 private:
  struct Entry {
    std::shared_ptr<Backend> backend;
    int max_retries = kDefaultMaxRetries;
    int timeout_seconds = 120;
  };

  const Entry& entry(std::string_view backend_id) const;
  void insert(const std::string& backend_id, Entry e);

  mutable std::mutex mutex_;
  std::map<std::string, Entry, std::less<>> backends_;
  std::vector<std::string> allowed_hosts_;
};

// ---------------------------------------------------------------------------
// Stub backend

enum class StubFailMode { Error, Empty, UnclosedFence, Timeout };

/// One scripted exchange. Transcript file syntax, records separated by a
/// line holding only `===`:
///
///     match: TASK: data model
///     fail_count: 1
///     fail_mode: error
///
///     CREATE TABLE ...
///
/// Field lines come first; the body starts after them (one blank separator
/// line is dropped). `match` is a substring of the prompt, empty matches
/// everything.
struct StubRecord {
  std::string match;
  int fail_count = 0;
  StubFailMode fail_mode = StubFailMode::Error;
  std::string response;
};

std::vector<StubRecord> parse_transcript(std::string_view text, std::string_view origin = "<memory>");

/// Replays a transcript. For each prompt the first matching record that is
/// not spent answers; a record is spent once it has answered, except the
/// last record matching that prompt, which keeps answering. A record fails
/// its first `fail_count` selections before answering.
class StubBackend : public Backend {
 public:
  explicit StubBackend(std::vector<StubRecord> records);
  static std::unique_ptr<StubBackend> from_file(const std::filesystem::path& path);

  std::string send(const BackendCall& call) override;

  /// Every prompt received, in order.
  std::vector<std::string> received() const;

 private:
  struct State {
    StubRecord record;
    int failures_left = 0;
    bool spent = false;
  };
  mutable std::mutex mutex_;
  std::vector<State> states_;
  std::vector<std::string> received_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible chat completions backend

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string base_path;  // without trailing slash
};

ParsedUrl parse_endpoint_url(std::string_view url);

class OpenAiCompatibleBackend : public Backend {
 public:
  OpenAiCompatibleBackend(std::string endpoint, std::string model, std::string api_key = {});

  std::string send(const BackendCall& call) override;

 private:
  ParsedUrl url_;
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
};

}  // namespace modernkit
