#pragma once

#include "modernkit/artifact_store.hpp"
#include "modernkit/error.hpp"
#include "modernkit/llm_gateway.hpp"
#include "modernkit/pipeline.hpp"
#include "modernkit/prompt_library.hpp"
#include "modernkit/scanner.hpp"
#include "modernkit/util.hpp"
#include "modernkit/verifier.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path fixtures_dir() { return fs::path(MODERNKIT_FIXTURES_DIR); }

/// A fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("modernkit-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const fs::path& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Backend that returns canned answers in order and records each call.
class ScriptedBackend : public modernkit::Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> answers, int failures = 0)
      : answers_(std::move(answers)), failures_(failures) {}

  std::string send(const modernkit::BackendCall& call) override {
    prompts.emplace_back(call.prompt);
    if (failures_ > 0) {
      --failures_;
      throw modernkit::Error(modernkit::ErrorCode::BackendError, "scripted failure", {{"status", 500}});
    }
    if (answers_.empty()) return "ok";
    auto a = answers_.front();
    if (answers_.size() > 1) answers_.erase(answers_.begin());
    return a;
  }

  std::vector<std::string> prompts;

 private:
  std::vector<std::string> answers_;
  int failures_;
};

/// Workspace, gateway, prompts and engine over a temp directory.
struct Stack {
  TempDir dir;
  modernkit::Workspace workspace;
  modernkit::LlmGateway gateway;
  modernkit::PromptLibrary prompts;
  std::unique_ptr<modernkit::PipelineEngine> engine;

  explicit Stack(modernkit::EngineSettings settings = {})
      : workspace(modernkit::Workspace::create(dir / "ws", modernkit::WorkspaceOptions{false})),
        prompts(modernkit::PromptLibrary::embedded()) {
    engine = std::make_unique<modernkit::PipelineEngine>(workspace, gateway, prompts, std::move(settings));
  }

  modernkit::StubBackend* add_stub(const std::string& id, const fs::path& transcript, int max_retries = 2) {
    auto stub = modernkit::StubBackend::from_file(transcript);
    auto* raw = stub.get();
    gateway.register_backend(id, std::move(stub), max_retries, 30);
    return raw;
  }
};

inline modernkit::LayerManifest petclinic_manifest() {
  return modernkit::scan_repository(fixtures_dir() / "petclinic");
}

}  // namespace testing_support
