#include "modernkit/scanner.hpp"

#include "modernkit/error.hpp"
#include "modernkit/util.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace modernkit {

namespace fs = std::filesystem;

std::string_view to_string(LayerKind layer) {
  switch (layer) {
    case LayerKind::Interaction: return "Interaction";
    case LayerKind::BusinessLogic: return "BusinessLogic";
    case LayerKind::Data: return "Data";
    case LayerKind::Config: return "Config";
    case LayerKind::Unclassified: return "Unclassified";
  }
  return "Unclassified";
}

std::optional<LayerKind> parse_layer(std::string_view name) {
  for (auto layer : kAllLayers) {
    if (to_string(layer) == name) return layer;
  }
  return std::nullopt;
}

std::string_view to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::Content: return "content";
    case RuleKind::Path: return "path";
    case RuleKind::Extension: return "extension";
  }
  return "content";
}

std::optional<RuleKind> parse_rule_kind(std::string_view name) {
  for (auto kind : {RuleKind::Content, RuleKind::Path, RuleKind::Extension}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string ScanRule::id() const {
  std::string out(to_string(kind));
  out += ':';
  out += pattern;
  return out;
}

ScanConfig ScanConfig::defaults() {
  ScanConfig cfg;
  cfg.exclude_dirs = {"target", "build", "node_modules", ".git", "dist"};

  const auto content = [&](const char* marker, LayerKind layer) {
    cfg.rules.push_back({RuleKind::Content, marker, layer});
  };
  for (const char* marker : {"@Controller", "@RestController", "@WebServlet", "@WebFilter", "@ServerEndpoint",
                             "@Path", "@RequestMapping", "@GetMapping", "@PostMapping", "@PutMapping",
                             "@DeleteMapping", "@PatchMapping"}) {
    content(marker, LayerKind::Interaction);
  }
  content("@Service", LayerKind::BusinessLogic);
  content("@Repository", LayerKind::Data);
  content("@Entity", LayerKind::Data);

  cfg.rules.push_back({RuleKind::Path, "controller|web|rest|ui|view|templates|static", LayerKind::Interaction});
  cfg.rules.push_back({RuleKind::Path, "service|domain|logic", LayerKind::BusinessLogic});
  cfg.rules.push_back({RuleKind::Path, "repository|dao|db|persistence|model|entity", LayerKind::Data});

  cfg.rules.push_back({RuleKind::Extension, ".sql", LayerKind::Data});
  for (const char* ext : {".properties", ".yml", ".yaml", ".xml", ".toml", ".env"}) {
    cfg.rules.push_back({RuleKind::Extension, ext, LayerKind::Config});
  }
  for (const char* ext : {".html", ".jsp", ".css", ".js"}) {
    cfg.rules.push_back({RuleKind::Extension, ext, LayerKind::Interaction});
  }
  return cfg;
}

std::size_t LayerManifest::count(LayerKind layer) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ProjectFile& f) { return f.layer == layer; }));
}

namespace {

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '$';
}

bool content_matches(std::string_view content, std::string_view marker) {
  if (marker.empty()) return false;
  std::size_t pos = 0;
  while ((pos = content.find(marker, pos)) != std::string_view::npos) {
    const auto after = pos + marker.size();
    if (after >= content.size() || !is_ident_char(content[after])) return true;
    pos = after;
  }
  return false;
}

std::vector<std::string> directory_segments(std::string_view relative_path) {
  std::vector<std::string> segments;
  std::size_t start = 0;
  while (true) {
    const auto slash = relative_path.find('/', start);
    if (slash == std::string_view::npos) break;  // the remainder is the file name
    if (slash > start) segments.emplace_back(relative_path.substr(start, slash - start));
    start = slash + 1;
  }
  return segments;
}

std::string_view file_name(std::string_view relative_path) {
  const auto slash = relative_path.rfind('/');
  return slash == std::string_view::npos ? relative_path : relative_path.substr(slash + 1);
}

bool path_matches(const std::vector<std::string>& segments, const std::string& pattern) {
  std::regex re;
  try {
    re = std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::InvalidConfig, "invalid path rule pattern '" + pattern + "': " + e.what());
  }
  return std::any_of(segments.begin(), segments.end(),
                     [&](const std::string& seg) { return std::regex_match(seg, re); });
}

bool extension_matches(std::string_view relative_path, std::string_view suffix) {
  if (suffix.empty()) return false;
  const auto name = util::to_lower(file_name(relative_path));
  const auto want = util::to_lower(suffix);
  return name.size() >= want.size() && name.compare(name.size() - want.size(), want.size(), want) == 0;
}

}  // namespace

Classification classify_file(std::string_view relative_path, std::string_view content,
                             const std::vector<ScanRule>& rules) {
  for (const auto& rule : rules) {
    if (rule.kind == RuleKind::Content && content_matches(content, rule.pattern)) {
      return {rule.layer, rule.id()};
    }
  }
  const auto segments = directory_segments(relative_path);
  for (const auto& rule : rules) {
    if (rule.kind == RuleKind::Path && path_matches(segments, rule.pattern)) {
      return {rule.layer, rule.id()};
    }
  }
  for (const auto& rule : rules) {
    if (rule.kind == RuleKind::Extension && extension_matches(relative_path, rule.pattern)) {
      return {rule.layer, rule.id()};
    }
  }
  return {LayerKind::Unclassified, std::nullopt};
}

Classification classify_file(std::string_view relative_path, std::string_view content) {
  static const auto defaults = ScanConfig::defaults().rules;
  return classify_file(relative_path, content, defaults);
}

LayerManifest scan_repository(const fs::path& root, const ScanConfig& config) {
  std::error_code ec;
  const auto status = fs::status(root, ec);
  if (ec || !fs::exists(status)) {
    throw Error(ErrorCode::RootNotFound, "scan root not found: " + root.string(), {{"path", root.string()}});
  }
  if (!fs::is_directory(status)) {
    throw Error(ErrorCode::NotADirectory, "scan root is not a directory: " + root.string(),
                {{"path", root.string()}});
  }

  const std::set<std::string> excluded(config.exclude_dirs.begin(), config.exclude_dirs.end());
  const fs::path base = fs::canonical(root);

  LayerManifest manifest;
  manifest.scan_root = base.generic_string();

  fs::recursive_directory_iterator it(base, fs::directory_options::none, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot read " + base.string() + ": " + ec.message(), {{"path", base.string()}});

  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) {
      throw Error(ErrorCode::IoError, "directory walk failed under " + base.string() + ": " + ec.message(),
                  {{"path", base.string()}});
    }
    const auto& entry = *it;
    if (entry.is_symlink(ec)) {
      if (entry.is_directory(ec)) it.disable_recursion_pending();
      continue;
    }
    if (entry.is_directory(ec)) {
      if (excluded.count(entry.path().filename().string())) it.disable_recursion_pending();
      continue;
    }
    if (!entry.is_regular_file(ec)) continue;

    std::string content;
    try {
      content = util::read_file(entry.path());
    } catch (const Error& e) {
      throw Error(ErrorCode::IoError, e.what(), {{"path", entry.path().string()}});
    }
    if (!util::is_valid_utf8(content)) continue;

    ProjectFile file;
    file.relative_path = entry.path().lexically_relative(base).generic_string();
    file.size_bytes = content.size();
    file.content = std::move(content);
    const auto cls = classify_file(file.relative_path, file.content, config.rules);
    file.layer = cls.layer;
    if (cls.rule_id) manifest.rule_hits.emplace(file.relative_path, *cls.rule_id);
    manifest.entries.push_back(std::move(file));
  }

  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ProjectFile& a, const ProjectFile& b) { return a.relative_path < b.relative_path; });
  return manifest;
}

std::vector<ProjectFile> files_for_layer(const LayerManifest& manifest, LayerKind layer) {
  std::vector<ProjectFile> out;
  std::copy_if(manifest.entries.begin(), manifest.entries.end(), std::back_inserter(out),
               [&](const ProjectFile& f) { return f.layer == layer; });
  return out;
}

}  // namespace modernkit
