#pragma once

#include "modernkit/artifact_store.hpp"
#include "modernkit/config.hpp"
#include "modernkit/llm_gateway.hpp"
#include "modernkit/pipeline.hpp"
#include "modernkit/prompt_library.hpp"
#include "modernkit/scanner.hpp"
#include "modernkit/verifier.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace modernkit {

/// Everything wired up for one workspace: configuration, backends, prompt
/// templates (embedded defaults plus <workspace>/templates overrides), the
/// engine and the verifier.
class Session {
 public:
  static std::unique_ptr<Session> open(const std::filesystem::path& root, WorkspaceOptions options = {});

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  Workspace& workspace() { return workspace_; }
  const AppConfig& config() const { return config_; }
  LlmGateway& gateway() { return *gateway_; }
  const PromptLibrary& prompts() const { return prompts_; }
  PipelineEngine& engine() { return *engine_; }
  Verifier& verifier() { return *verifier_; }

  /// The last scan result stored in the workspace, if any.
  std::optional<LayerManifest> manifest() const;
  void store_manifest(const LayerManifest& manifest);

 private:
  Session(Workspace workspace, AppConfig config);

  Workspace workspace_;
  AppConfig config_;
  std::unique_ptr<LlmGateway> gateway_;
  PromptLibrary prompts_;
  std::unique_ptr<PipelineEngine> engine_;
  std::unique_ptr<Verifier> verifier_;
};

inline constexpr const char* kManifestFile = "layer-manifest.json";

}  // namespace modernkit
