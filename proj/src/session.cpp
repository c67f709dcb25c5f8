#include "modernkit/session.hpp"

#include "modernkit/serialization.hpp"

namespace modernkit {

namespace fs = std::filesystem;

std::unique_ptr<Session> Session::open(const fs::path& root, WorkspaceOptions options) {
  auto ws = Workspace::open(root, std::move(options));
  auto config = AppConfig::load(ws.config_path());
  return std::unique_ptr<Session>(new Session(std::move(ws), std::move(config)));
}

Session::Session(Workspace workspace, AppConfig config)
    : workspace_(std::move(workspace)),
      config_(std::move(config)),
      gateway_(std::make_unique<LlmGateway>()),
      prompts_(PromptLibrary::with_overrides(workspace_.templates_dir())) {
  gateway_->set_allowed_hosts(config_.allowed_hosts);
  for (const auto& [id, settings] : config_.backends) gateway_->register_backend(id, settings);
  if (config_.max_context_chars > 0) prompts_.set_max_context_chars(config_.max_context_chars);
  engine_ = std::make_unique<PipelineEngine>(workspace_, *gateway_, prompts_, config_.pipeline);
  verifier_ = std::make_unique<Verifier>(workspace_, *gateway_, prompts_, *engine_, config_.verify);
}

std::optional<LayerManifest> Session::manifest() const {
  const auto text = workspace_.read_file(kManifestFile);
  if (!text) return std::nullopt;
  return json::parse(*text).get<LayerManifest>();
}

void Session::store_manifest(const LayerManifest& manifest) {
  workspace_.write_file(kManifestFile, json(manifest).dump() + "\n");
}

}  // namespace modernkit
