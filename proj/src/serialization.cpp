#include "modernkit/serialization.hpp"

#include "modernkit/error.hpp"

namespace modernkit {

namespace {

template <typename Enum, typename Parse>
Enum parse_enum(const json& j, std::string_view field, Parse parse) {
  const auto name = j.at(std::string(field)).get<std::string>();
  const auto value = parse(name);
  if (!value) {
    throw Error(ErrorCode::InvalidArgument, "invalid " + std::string(field) + " '" + name + "'",
                {{"field", std::string(field)}, {"value", name}});
  }
  return *value;
}

std::string str(auto v) { return std::string(to_string(v)); }

}  // namespace

void to_json(json& j, const ProjectFile& f) {
  j = {{"relative_path", f.relative_path}, {"content", f.content}, {"size_bytes", f.size_bytes}, {"layer", str(f.layer)}};
}

void from_json(const json& j, ProjectFile& f) {
  f.relative_path = j.at("relative_path").get<std::string>();
  f.content = j.value("content", std::string());
  f.size_bytes = j.value("size_bytes", f.content.size());
  f.layer = parse_enum<LayerKind>(j, "layer", parse_layer);
}

void to_json(json& j, const LayerManifest& m) {
  j = {{"scan_root", m.scan_root}, {"entries", m.entries}, {"rule_hits", m.rule_hits}};
}

void from_json(const json& j, LayerManifest& m) {
  m.scan_root = j.at("scan_root").get<std::string>();
  m.entries = j.at("entries").get<std::vector<ProjectFile>>();
  m.rule_hits = j.value("rule_hits", std::map<std::string, std::string>{});
}

json manifest_summary(const LayerManifest& m) {
  json entries = json::array();
  for (const auto& f : m.entries) {
    const auto hit = m.rule_hits.find(f.relative_path);
    entries.push_back({{"relative_path", f.relative_path},
                       {"size_bytes", f.size_bytes},
                       {"layer", str(f.layer)},
                       {"rule", hit == m.rule_hits.end() ? json(nullptr) : json(hit->second)}});
  }
  json counts = json::object();
  for (auto layer : kAllLayers) counts[str(layer)] = m.count(layer);
  return {{"scan_root", m.scan_root}, {"file_count", m.entries.size()}, {"counts", counts}, {"entries", entries}};
}

void to_json(json& j, const ArtifactRef& r) { j = {{"artifact_id", r.artifact_id}, {"version", r.version}}; }

void from_json(const json& j, ArtifactRef& r) {
  r.artifact_id = j.at("artifact_id").get<std::string>();
  r.version = j.at("version").get<int>();
}

void to_json(json& j, const Artifact& a) {
  j = {{"artifact_id", a.artifact_id}, {"module_tag", a.module_tag}, {"kind", str(a.kind)},
       {"version", a.version},         {"body", a.body},             {"explanation", a.explanation},
       {"provenance", str(a.provenance)}, {"context_refs", a.context_refs}, {"created_at", a.created_at}};
}

void from_json(const json& j, Artifact& a) {
  a.artifact_id = j.at("artifact_id").get<std::string>();
  a.module_tag = j.at("module_tag").get<std::string>();
  a.kind = parse_enum<ArtifactKind>(j, "kind", parse_artifact_kind);
  a.version = j.at("version").get<int>();
  a.body = j.value("body", std::string());
  a.explanation = j.value("explanation", std::string());
  a.provenance = parse_enum<Provenance>(j, "provenance", parse_provenance);
  a.context_refs = j.value("context_refs", std::vector<ArtifactRef>{});
  a.created_at = j.value("created_at", std::string());
}

void to_json(json& j, const ArtifactSummary& s) {
  j = {{"artifact_id", s.artifact_id},       {"module_tag", s.module_tag},
       {"kind", str(s.kind)},                {"latest_version", s.latest_version},
       {"provenance", str(s.provenance)},    {"created_at", s.created_at}};
}

void from_json(const json& j, ArtifactSummary& s) {
  s.artifact_id = j.at("artifact_id").get<std::string>();
  s.module_tag = j.at("module_tag").get<std::string>();
  s.kind = parse_enum<ArtifactKind>(j, "kind", parse_artifact_kind);
  s.latest_version = j.at("latest_version").get<int>();
  s.provenance = parse_enum<Provenance>(j, "provenance", parse_provenance);
  s.created_at = j.value("created_at", std::string());
}

void to_json(json& j, const StepState& s) {
  j = {{"step", str(s.step)},
       {"status", str(s.status)},
       {"artifact", s.artifact ? json(*s.artifact) : json(nullptr)},
       {"attempt_count", s.attempt_count},
       {"backend_id", s.backend_id}};
}

void from_json(const json& j, StepState& s) {
  s.step = parse_enum<StepKind>(j, "step", parse_step);
  s.status = parse_enum<StepStatus>(j, "status", parse_step_status);
  s.artifact.reset();
  if (j.contains("artifact") && !j["artifact"].is_null()) s.artifact = j["artifact"].get<ArtifactRef>();
  s.attempt_count = j.value("attempt_count", 0);
  s.backend_id = j.value("backend_id", std::string());
}

void to_json(json& j, const RunSource& s) {
  j = {{"artifact", s.artifact ? json(*s.artifact) : json(nullptr)},
       {"scan_root", s.scan_root},
       {"file_count", s.file_count}};
}

void from_json(const json& j, RunSource& s) {
  s.artifact.reset();
  if (j.contains("artifact") && !j["artifact"].is_null()) s.artifact = j["artifact"].get<ArtifactRef>();
  s.scan_root = j.value("scan_root", std::string());
  s.file_count = j.value("file_count", std::size_t{0});
}

void to_json(json& j, const PipelineRun& r) {
  j = {{"run_id", r.run_id},         {"phase", str(r.phase)},       {"module_tag", r.module_tag},
       {"source", r.source},         {"steps", r.steps},            {"created_at", r.created_at},
       {"updated_at", r.updated_at}};
}

void from_json(const json& j, PipelineRun& r) {
  r.run_id = j.at("run_id").get<std::string>();
  r.phase = parse_enum<PhaseKind>(j, "phase", parse_phase);
  r.module_tag = j.at("module_tag").get<std::string>();
  r.source = j.at("source").get<RunSource>();
  r.steps = j.at("steps").get<std::vector<StepState>>();
  r.created_at = j.value("created_at", std::string());
  r.updated_at = j.value("updated_at", std::string());
}

void to_json(json& j, const PromptExchange& e) {
  j = {{"label", e.label},       {"template_id", e.template_id}, {"prompt", e.prompt},
       {"response", e.response}, {"explanation", e.explanation}, {"failed", e.failed}};
}

void from_json(const json& j, PromptExchange& e) {
  e.label = j.value("label", std::string());
  e.template_id = j.value("template_id", std::string());
  e.prompt = j.at("prompt").get<std::string>();
  e.response = j.value("response", std::string());
  e.explanation = j.value("explanation", std::string());
  e.failed = j.value("failed", false);
}

void to_json(json& j, const PromptTemplate& t) {
  j = {{"template_id", t.template_id},
       {"required_placeholders", t.required_placeholders},
       {"max_context_chars", t.max_context_chars}};
}

void to_json(json& j, const RenderedPrompt& p) {
  j = {{"template_id", p.template_id}, {"text", p.text},           {"parts", p.parts},
       {"context_chars", p.context_chars}, {"truncated", p.truncated}};
}

void to_json(json& j, const CompletionResult& r) {
  j = {{"text", r.text},       {"explanation", r.explanation}, {"attempts", r.attempts},
       {"backend_id", r.backend_id}, {"duration_ms", r.duration_ms}};
}

void to_json(json& j, const SimilarityReport& r) {
  j = {{"score", r.score},
       {"threshold", r.threshold},
       {"passed", r.passed},
       {"metric", str(r.metric)},
       {"left_token_count", r.left_token_count},
       {"right_token_count", r.right_token_count},
       {"missing_tokens", r.missing_tokens}};
}

void from_json(const json& j, SimilarityReport& r) {
  r.score = j.at("score").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.passed = j.at("passed").get<bool>();
  r.metric = parse_enum<SimilarityMetric>(j, "metric", parse_metric);
  r.left_token_count = j.value("left_token_count", std::size_t{0});
  r.right_token_count = j.value("right_token_count", std::size_t{0});
  r.missing_tokens = j.value("missing_tokens", std::vector<std::string>{});
}

void to_json(json& j, const VerificationRecord& r) {
  j = {{"record_id", r.record_id},
       {"kind", str(r.kind)},
       {"artifact", r.artifact},
       {"run_id", r.run_id ? json(*r.run_id) : json(nullptr)},
       {"step", r.step ? json(str(*r.step)) : json(nullptr)},
       {"regenerated_text", r.regenerated_text},
       {"report", r.report},
       {"backend_id", r.backend_id},
       {"created_at", r.created_at}};
}

void from_json(const json& j, VerificationRecord& r) {
  r.record_id = j.at("record_id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  r.kind = kind == "cross" ? VerificationKind::Cross : VerificationKind::Reverse;
  r.artifact = j.at("artifact").get<ArtifactRef>();
  r.run_id.reset();
  if (j.contains("run_id") && !j["run_id"].is_null()) r.run_id = j["run_id"].get<std::string>();
  r.step.reset();
  if (j.contains("step") && !j["step"].is_null()) r.step = parse_enum<StepKind>(j, "step", parse_step);
  r.regenerated_text = j.value("regenerated_text", std::string());
  r.report = j.at("report").get<SimilarityReport>();
  r.backend_id = j.value("backend_id", std::string());
  r.created_at = j.value("created_at", std::string());
}

}  // namespace modernkit
