#include "modernkit/config.hpp"

#include "modernkit/error.hpp"
#include "modernkit/util.hpp"

namespace modernkit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': " + why, {{"key", key}});
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  const auto& s = root[name];
  if (!s.is_object()) invalid(name, "expected an object");
  return s;
}

template <typename T>
T get(const json& obj, const std::string& parent, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    invalid(parent + "." + key, "wrong type");
  }
}

BackendSettings parse_backend(const std::string& id, const json& j, const fs::path& base_dir) {
  const std::string key = "llm.backends." + id;
  if (!j.is_object()) invalid(key, "expected an object");
  BackendSettings b;
  const auto kind = get<std::string>(j, key, "kind", "openai_compatible");
  const auto parsed = parse_backend_kind(kind);
  if (!parsed) invalid(key + ".kind", "unknown backend kind '" + kind + "'");
  b.kind = *parsed;
  b.endpoint = get<std::string>(j, key, "endpoint", "");
  if (b.endpoint.empty()) invalid(key + ".endpoint", "required");
  if (b.kind == BackendKind::Stub && fs::path(b.endpoint).is_relative()) {
    b.endpoint = (base_dir / b.endpoint).lexically_normal().string();
  }
  b.model = get<std::string>(j, key, "model", "");
  b.max_retries = get<int>(j, key, "max_retries", kDefaultMaxRetries);
  if (b.max_retries < 0) invalid(key + ".max_retries", "must not be negative");
  b.timeout_seconds = get<int>(j, key, "timeout_seconds", 120);
  if (b.timeout_seconds <= 0) invalid(key + ".timeout_seconds", "must be positive");
  b.api_key_env = get<std::string>(j, key, "api_key_env", "");
  return b;
}

}  // namespace

AppConfig AppConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) invalid("<root>", "expected an object");
  AppConfig c;

  const auto& scan = section(j, "scan");
  if (scan.contains("exclude_dirs")) {
    c.scan.exclude_dirs = get<std::vector<std::string>>(scan, "scan", "exclude_dirs", {});
  }
  if (scan.contains("rules")) {
    if (!scan["rules"].is_array()) invalid("scan.rules", "expected an array");
    c.scan.rules.clear();
    for (const auto& r : scan["rules"]) {
      ScanRule rule;
      const auto kind = get<std::string>(r, "scan.rules[]", "kind", "");
      const auto layer = get<std::string>(r, "scan.rules[]", "layer", "");
      const auto k = parse_rule_kind(kind);
      const auto l = parse_layer(layer);
      if (!k) invalid("scan.rules[].kind", "unknown rule kind '" + kind + "'");
      if (!l) invalid("scan.rules[].layer", "unknown layer '" + layer + "'");
      rule.kind = *k;
      rule.layer = *l;
      rule.pattern = get<std::string>(r, "scan.rules[]", "pattern", "");
      if (rule.pattern.empty()) invalid("scan.rules[].pattern", "required");
      c.scan.rules.push_back(std::move(rule));
    }
  }

  const auto& llm = section(j, "llm");
  if (llm.contains("backends")) {
    if (!llm["backends"].is_object()) invalid("llm.backends", "expected an object");
    for (const auto& [id, b] : llm["backends"].items()) c.backends[id] = parse_backend(id, b, base_dir);
  }
  c.allowed_hosts = get<std::vector<std::string>>(llm, "llm", "allowed_hosts", {});

  const auto& prompts = section(j, "prompts");
  const auto max_chars = get<long long>(prompts, "prompts", "max_context_chars", 0);
  if (max_chars < 0) invalid("prompts.max_context_chars", "must not be negative");
  c.max_context_chars = static_cast<std::size_t>(max_chars);

  const auto& pipeline = section(j, "pipeline");
  c.pipeline.default_backend = get<std::string>(pipeline, "pipeline", "backend", "");
  c.pipeline.default_module_tag = get<std::string>(pipeline, "pipeline", "module_tag", c.pipeline.default_module_tag);
  c.pipeline.temperature = get<double>(pipeline, "pipeline", "temperature", c.pipeline.temperature);
  if (!(c.pipeline.temperature >= 0.0 && c.pipeline.temperature <= 1.0)) {
    invalid("pipeline.temperature", "must be within [0, 1]");
  }
  c.pipeline.max_output_tokens = get<int>(pipeline, "pipeline", "max_output_tokens", c.pipeline.max_output_tokens);
  if (c.pipeline.max_output_tokens <= 0) invalid("pipeline.max_output_tokens", "must be positive");

  const auto& verify = section(j, "verify");
  const auto metric = get<std::string>(verify, "verify", "metric", "jaccard");
  const auto m = parse_metric(metric);
  if (!m) invalid("verify.metric", "unknown metric '" + metric + "'");
  c.verify.metric = *m;
  c.verify.threshold = get<double>(verify, "verify", "threshold", kDefaultSimilarityThreshold);
  if (!(c.verify.threshold >= 0.0 && c.verify.threshold <= 1.0)) invalid("verify.threshold", "must be within [0, 1]");
  c.verify.secondary_backend = get<std::string>(verify, "verify", "secondary_backend", "");
  return c;
}

AppConfig AppConfig::load(const fs::path& config_file) {
  if (!fs::exists(config_file)) return AppConfig{};
  const auto j = json::parse(util::read_file(config_file), nullptr, false);
  if (j.is_discarded()) invalid("<root>", "not valid JSON");
  return from_json(j, config_file.parent_path());
}

}  // namespace modernkit
