#pragma once

#include "modernkit/artifact_store.hpp"
#include "modernkit/llm_gateway.hpp"
#include "modernkit/prompt_library.hpp"
#include "modernkit/scanner.hpp"
#include "modernkit/steps.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace modernkit {

enum class StepStatus { Pending, Generated, Approved, Rejected };

std::string_view to_string(StepStatus status);
std::optional<StepStatus> parse_step_status(std::string_view name);

struct StepState {
  StepKind step = StepKind::InteractionReq;
  StepStatus status = StepStatus::Pending;
  std::optional<ArtifactRef> artifact;  // present when Generated or Approved; kept on Rejected for audit
  int attempt_count = 0;
  std::string backend_id;  // backend that produced the last generation

  bool operator==(const StepState&) const = default;
};

/// Where a run's input comes from: a scanned manifest (requirements
/// extraction) or an approved consolidation artifact (application generation).
struct RunSource {
  std::optional<ArtifactRef> artifact;
  std::string scan_root;
  std::size_t file_count = 0;

  bool operator==(const RunSource&) const = default;
};

struct PipelineRun {
  std::string run_id;
  PhaseKind phase = PhaseKind::RequirementsExtraction;
  std::string module_tag;
  RunSource source;
  std::vector<StepState> steps;  // canonical order for the phase
  std::string created_at;
  std::string updated_at;

  const StepState& state(StepKind step) const;
  StepState& state(StepKind step);
  bool has_step(StepKind step) const;
  bool operator==(const PipelineRun&) const = default;
};

enum class Verdict { Approve, Reject };

std::string_view to_string(Verdict verdict);
std::optional<Verdict> parse_verdict(std::string_view name);

struct ReviewDecision {
  std::string run_id;
  StepKind step = StepKind::InteractionReq;
  Verdict verdict = Verdict::Approve;
  std::optional<std::string> edited_content;  // Approve only
  std::string reviewer;
  std::optional<std::string> note;
  std::string decided_at;  // filled in when empty
};

/// Input to create_run. Requirements extraction needs `manifest`;
/// application generation needs `artifact_id` (latest version unless
/// `artifact_version` is set).
struct RunSourceInput {
  std::optional<LayerManifest> manifest;
  std::optional<std::string> artifact_id;
  std::optional<int> artifact_version;
  std::string module_tag;  // requirements runs only; generation runs inherit the source's tag
};

struct GenerateOptions {
  std::optional<std::string> backend_id;
  std::string operator_notes;  // Consolidate only: extra requirements to fold in
};

/// One prompt sent while generating a step and what came back. Kept per
/// attempt so a verification model can replay the exact prompts.
struct PromptExchange {
  std::string label;  // e.g. the file path for per-file prompts
  std::string template_id;
  std::string prompt;
  std::string response;
  std::string explanation;
  bool failed = false;
};

struct EngineSettings {
  std::string default_backend;  // empty: the only registered backend
  std::string default_module_tag = "application";
  double temperature = kDefaultTemperature;
  int max_output_tokens = 4096;
};

/// Drives runs through their steps. A step can be generated only when every
/// earlier step is Approved, and only a human review moves a Generated step
/// forward. All mutations of one run are serialized; different runs proceed
/// independently.
class PipelineEngine {
 public:
  PipelineEngine(Workspace& workspace, const LlmGateway& gateway, const PromptLibrary& prompts,
                 EngineSettings settings = {});

  PipelineRun create_run(PhaseKind phase, const RunSourceInput& source);
  Artifact generate_step(const std::string& run_id, StepKind step, const GenerateOptions& options = {});
  StepState submit_review(const ReviewDecision& decision);
  Artifact repair_artifact(const std::string& run_id, StepKind step,
                           const std::optional<std::string>& backend_id = std::nullopt);

  PipelineRun run_status(const std::string& run_id) const;
  std::vector<PipelineRun> list_runs() const;
  LayerManifest run_manifest(const std::string& run_id) const;

  /// Prompts and responses of the step's latest generation.
  std::vector<PromptExchange> step_exchanges(const std::string& run_id, StepKind step) const;

  /// True when `ref` is the approved artifact of a Consolidate step in some run.
  bool is_approved_consolidation(const ArtifactRef& ref) const;

  const EngineSettings& settings() const { return settings_; }
  std::string resolve_backend(const std::optional<std::string>& requested) const;

 private:
  struct StepOutput {
    std::string body;
    std::string explanation;
    std::vector<ArtifactRef> context_refs;
    std::vector<PromptExchange> exchanges;
  };

  std::shared_ptr<std::mutex> run_mutex(const std::string& run_id) const;
  PipelineRun load_run(const std::string& run_id) const;
  void store_run(PipelineRun& run, const nlohmann::json& event);

  StepOutput produce_layer(const PipelineRun& run, StepKind step, const std::string& backend) const;
  StepOutput produce_from_context(const PipelineRun& run, StepKind step, const std::string& backend,
                                  const std::string& operator_notes) const;
  std::pair<CompletionResult, std::vector<PromptExchange>> complete_rendered(const RenderedPrompt& rendered,
                                                                           const std::string& backend,
                                                                           const std::string& label) const;

  Workspace& workspace_;
  const LlmGateway& gateway_;
  const PromptLibrary& prompts_;
  EngineSettings settings_;

  mutable std::mutex locks_guard_;
  mutable std::map<std::string, std::shared_ptr<std::mutex>> run_locks_;
};

}  // namespace modernkit
