#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modernkit {

/// Architectural layer a legacy source file belongs to. The first three are
/// the modernization layers; Config holds properties and build descriptors.
enum class LayerKind { Interaction, BusinessLogic, Data, Config, Unclassified };

inline constexpr LayerKind kAllLayers[] = {LayerKind::Interaction, LayerKind::BusinessLogic, LayerKind::Data,
                                           LayerKind::Config, LayerKind::Unclassified};

std::string_view to_string(LayerKind layer);
std::optional<LayerKind> parse_layer(std::string_view name);

struct ProjectFile {
  std::string relative_path;  // forward-slash separated, relative to the scan root
  std::string content;
  std::size_t size_bytes = 0;
  LayerKind layer = LayerKind::Unclassified;

  bool operator==(const ProjectFile&) const = default;
};

enum class RuleKind { Content, Path, Extension };

std::string_view to_string(RuleKind kind);
std::optional<RuleKind> parse_rule_kind(std::string_view name);

/// One row of the classification table.
///
/// - Content: `pattern` is a literal marker (an annotation such as
///   `@Controller`); it matches when it occurs in the file and is not
///   immediately followed by an identifier character.
/// - Path: `pattern` is a regular expression that must fully match one
///   directory segment of the relative path (case-insensitive).
/// - Extension: `pattern` is a file-name suffix such as `.sql`
///   (case-insensitive), so dot-files like `.env` match too.
struct ScanRule {
  RuleKind kind = RuleKind::Content;
  std::string pattern;
  LayerKind layer = LayerKind::Unclassified;

  /// `<kind>:<pattern>`, reported in LayerManifest::rule_hits.
  std::string id() const;

  bool operator==(const ScanRule&) const = default;
};

struct ScanConfig {
  std::vector<std::string> exclude_dirs;
  std::vector<ScanRule> rules;

  /// Java/Spring-oriented defaults.
  static ScanConfig defaults();
};

struct Classification {
  LayerKind layer = LayerKind::Unclassified;
  std::optional<std::string> rule_id;
};

struct LayerManifest {
  std::string scan_root;
  std::vector<ProjectFile> entries;               // sorted by relative_path
  std::map<std::string, std::string> rule_hits;   // relative_path -> rule id

  std::size_t count(LayerKind layer) const;
  bool operator==(const LayerManifest&) const = default;
};

/// Applies the rules in three tiers: every content rule, then every path
/// rule, then every extension rule; the first match wins. Within a tier the
/// configured order decides.
Classification classify_file(std::string_view relative_path, std::string_view content,
                             const std::vector<ScanRule>& rules);
Classification classify_file(std::string_view relative_path, std::string_view content);

/// Walks `root`, skipping excluded directory names, symlinks and files whose
/// content is not valid UTF-8, and classifies everything else.
LayerManifest scan_repository(const std::filesystem::path& root, const ScanConfig& config = ScanConfig::defaults());

std::vector<ProjectFile> files_for_layer(const LayerManifest& manifest, LayerKind layer);

}  // namespace modernkit
