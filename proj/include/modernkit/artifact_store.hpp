#pragma once

#include "modernkit/steps.hpp"
#include "modernkit/util.hpp"

#include <json.hpp>

#include <compare>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modernkit {

/// A pipeline step output, or the per-file requirements a layer step is
/// assembled from.
enum class ArtifactKind {
  InteractionReq,
  BusinessReq,
  DataConfigReq,
  Consolidate,
  DataModelSql,
  OrmObjects,
  ApiCode,
  TestCases,
  UiCode,
  PerFileRequirement,
};

ArtifactKind artifact_kind_of(StepKind step);
std::optional<StepKind> step_of(ArtifactKind kind);
std::string_view to_string(ArtifactKind kind);
std::optional<ArtifactKind> parse_artifact_kind(std::string_view name);

enum class Provenance { LlmGenerated, HumanEdited, LlmRepaired };

std::string_view to_string(Provenance p);
std::optional<Provenance> parse_provenance(std::string_view name);

struct ArtifactRef {
  std::string artifact_id;
  int version = 0;

  auto operator<=>(const ArtifactRef&) const = default;
};

/// Input to save_artifact: an artifact without its version. Leave
/// artifact_id empty to have a fresh id assigned.
struct NewArtifact {
  std::string artifact_id;
  std::string module_tag;
  ArtifactKind kind = ArtifactKind::PerFileRequirement;
  std::string body;
  std::string explanation;
  Provenance provenance = Provenance::LlmGenerated;
  std::vector<ArtifactRef> context_refs;
};

struct Artifact {
  std::string artifact_id;
  std::string module_tag;
  ArtifactKind kind = ArtifactKind::PerFileRequirement;
  int version = 0;
  std::string body;
  std::string explanation;
  Provenance provenance = Provenance::LlmGenerated;
  std::vector<ArtifactRef> context_refs;
  std::string created_at;

  ArtifactRef ref() const { return {artifact_id, version}; }
  bool operator==(const Artifact&) const = default;
};

struct ArtifactSummary {
  std::string artifact_id;
  std::string module_tag;
  ArtifactKind kind = ArtifactKind::PerFileRequirement;
  int latest_version = 0;
  Provenance provenance = Provenance::LlmGenerated;  // of the latest version
  std::string created_at;                            // of version 1

  bool operator==(const ArtifactSummary&) const = default;
};

struct ArtifactFilter {
  std::optional<std::string> module_tag;
  std::optional<ArtifactKind> kind;
};

struct WorkspaceOptions {
  bool sync_writes = true;
  util::RenameFn rename = util::default_rename;
};

inline constexpr int kWorkspaceFormatVersion = 1;

/// On-disk workspace:
///
///     <root>/workspace.json            format marker
///     <root>/config.json               workspace configuration
///     <root>/artifacts/<tag>/<id>/v<N>.md, v<N>.explanation.md, v<N>.meta.json
///     <root>/runs/<run-id>/run.json, events.log
///     <root>/verifications/<record-id>.json
///     <root>/templates/<template-id>.prompt   optional prompt overrides
///
/// A version exists once its meta file does; the meta file is renamed into
/// place last, so a failed save never exposes a partial version. Writes are
/// serialized in-process by a mutex and across processes by flock() on
/// <root>/.lock.
class Workspace {
 public:
  /// Opens `root`, creating the layout first if it is not a workspace yet.
  static Workspace create(const std::filesystem::path& root, WorkspaceOptions options = {});
  /// Opens an existing workspace; WorkspaceNotFound otherwise.
  static Workspace open(const std::filesystem::path& root, WorkspaceOptions options = {});

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path runs_dir() const { return root_ / "runs"; }
  std::filesystem::path artifacts_dir() const { return root_ / "artifacts"; }
  std::filesystem::path verifications_dir() const { return root_ / "verifications"; }
  std::filesystem::path templates_dir() const { return root_ / "templates"; }
  std::filesystem::path config_path() const { return root_ / "config.json"; }

  Artifact save_artifact(const NewArtifact& artifact);
  Artifact load_artifact(std::string_view artifact_id, std::optional<int> version = std::nullopt) const;
  std::vector<int> versions(std::string_view artifact_id) const;
  bool exists(const ArtifactRef& ref) const;
  std::vector<ArtifactSummary> list_artifacts(const ArtifactFilter& filter = {}) const;

  /// Atomically replaces a file below the root (relative path).
  void write_file(const std::filesystem::path& relative, std::string_view content);
  void append_line(const std::filesystem::path& relative, std::string_view line);
  std::optional<std::string> read_file(const std::filesystem::path& relative) const;

  void set_rename_hook(util::RenameFn rename) { options_.rename = std::move(rename); }

 private:
  Workspace(std::filesystem::path root, WorkspaceOptions options);

  class WriteLock;
  std::optional<std::filesystem::path> find_artifact_dir(std::string_view artifact_id) const;
  std::filesystem::path checked(const std::filesystem::path& relative) const;

  std::filesystem::path root_;
  WorkspaceOptions options_;
  std::unique_ptr<std::mutex> write_mutex_;
};

bool is_valid_name(std::string_view name);

}  // namespace modernkit
