#pragma once

#include "modernkit/llm_gateway.hpp"
#include "modernkit/pipeline.hpp"
#include "modernkit/scanner.hpp"
#include "modernkit/verifier.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace modernkit {

/// Workspace configuration (config.json). Every section is optional.
///
///     {
///       "scan":     {"exclude_dirs": [...], "rules": [{"kind", "pattern", "layer"}, ...]},
///       "llm":      {"backends": {"<id>": {"kind", "endpoint", "model", "max_retries",
///                                          "timeout_seconds", "api_key_env"}},
///                    "allowed_hosts": [...]},
///       "prompts":  {"max_context_chars": 24000},
///       "pipeline": {"backend", "temperature", "max_output_tokens", "module_tag"},
///       "verify":   {"metric", "threshold", "secondary_backend"}
///     }
///
/// Stub transcript paths are resolved against the workspace root.
struct AppConfig {
  ScanConfig scan = ScanConfig::defaults();
  std::map<std::string, BackendSettings> backends;
  std::vector<std::string> allowed_hosts;
  std::size_t max_context_chars = 0;  // 0: per-template values
  EngineSettings pipeline;
  VerifierSettings verify;

  static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static AppConfig load(const std::filesystem::path& config_file);
};

}  // namespace modernkit
