#include "modernkit/artifact_store.hpp"

#include "modernkit/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>

namespace modernkit {

namespace fs = std::filesystem;
using nlohmann::json;

ArtifactKind artifact_kind_of(StepKind step) { return static_cast<ArtifactKind>(static_cast<int>(step)); }

std::optional<StepKind> step_of(ArtifactKind kind) {
  if (kind == ArtifactKind::PerFileRequirement) return std::nullopt;
  return static_cast<StepKind>(static_cast<int>(kind));
}

std::string_view to_string(ArtifactKind kind) {
  if (auto step = step_of(kind)) return to_string(*step);
  return "PerFileRequirement";
}

std::optional<ArtifactKind> parse_artifact_kind(std::string_view name) {
  if (name == "PerFileRequirement") return ArtifactKind::PerFileRequirement;
  if (auto step = parse_step(name)) return artifact_kind_of(*step);
  return std::nullopt;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::LlmGenerated: return "llm-generated";
    case Provenance::HumanEdited: return "human-edited";
    case Provenance::LlmRepaired: return "llm-repaired";
  }
  return "llm-generated";
}

std::optional<Provenance> parse_provenance(std::string_view name) {
  for (auto p : {Provenance::LlmGenerated, Provenance::HumanEdited, Provenance::LlmRepaired}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

bool is_valid_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || name == "." || name == "..") return false;
  const auto ok = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
           c == '.';
  };
  return std::all_of(name.begin(), name.end(), ok) && name.front() != '.';
}

// In-process mutex plus an exclusive flock() on <root>/.lock.
class Workspace::WriteLock {
 public:
  explicit WriteLock(const Workspace& ws) : guard_(*ws.write_mutex_) {
    const auto path = ws.root_ / ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open lock file " + path.string(), {{"path", path.string()}});
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw Error(ErrorCode::IoError, "cannot lock " + path.string(), {{"path", path.string()}});
      }
    }
  }
  ~WriteLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  WriteLock(const WriteLock&) = delete;
  WriteLock& operator=(const WriteLock&) = delete;

 private:
  std::lock_guard<std::mutex> guard_;
  int fd_ = -1;
};

Workspace::Workspace(fs::path root, WorkspaceOptions options)
    : root_(std::move(root)), options_(std::move(options)), write_mutex_(std::make_unique<std::mutex>()) {}

Workspace Workspace::create(const fs::path& root, WorkspaceOptions options) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create workspace " + root.string() + ": " + ec.message());
  Workspace ws(fs::canonical(root), std::move(options));
  {
    WriteLock lock(ws);
    for (const char* sub : {"runs", "artifacts", "verifications", "templates"}) {
      fs::create_directories(ws.root_ / sub, ec);
      if (ec) throw Error(ErrorCode::IoError, "cannot create " + (ws.root_ / sub).string() + ": " + ec.message());
    }
    if (!fs::exists(ws.root_ / "workspace.json")) {
      const json marker = {{"format", "modernkit-workspace"}, {"format_version", kWorkspaceFormatVersion}};
      util::atomic_write(ws.root_ / "workspace.json", marker.dump(2) + "\n", ws.options_.sync_writes);
    }
    if (!fs::exists(ws.config_path())) {
      util::atomic_write(ws.config_path(), "{}\n", ws.options_.sync_writes);
    }
  }
  return open(ws.root_, ws.options_);
}

Workspace Workspace::open(const fs::path& root, WorkspaceOptions options) {
  std::error_code ec;
  const auto marker_path = root / "workspace.json";
  if (!fs::is_regular_file(marker_path, ec)) {
    throw Error(ErrorCode::WorkspaceNotFound, "not a workspace: " + root.string(), {{"path", root.string()}});
  }
  const auto marker = json::parse(util::read_file(marker_path), nullptr, false);
  if (marker.is_discarded() || marker.value("format_version", 0) != kWorkspaceFormatVersion) {
    throw Error(ErrorCode::InvalidConfig, "unsupported workspace format in " + marker_path.string());
  }
  return Workspace(fs::canonical(root), std::move(options));
}

namespace {

std::optional<int> parse_meta_version(const std::string& filename) {
  // v<N>.meta.json
  constexpr std::string_view suffix = ".meta.json";
  if (filename.size() <= 1 + suffix.size() || filename[0] != 'v') return std::nullopt;
  if (filename.compare(filename.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
  const std::string_view digits(filename.data() + 1, filename.size() - 1 - suffix.size());
  int n = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || n <= 0) return std::nullopt;
  return n;
}

std::vector<int> versions_in(const fs::path& dir) {
  std::vector<int> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (auto v = parse_meta_version(entry.path().filename().string())) out.push_back(*v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string version_file(int version, std::string_view suffix) {
  return "v" + std::to_string(version) + std::string(suffix);
}

json meta_to_json(const Artifact& a) {
  json refs = json::array();
  for (const auto& r : a.context_refs) refs.push_back({{"artifact_id", r.artifact_id}, {"version", r.version}});
  return {{"artifact_id", a.artifact_id},
          {"module_tag", a.module_tag},
          {"kind", std::string(to_string(a.kind))},
          {"version", a.version},
          {"provenance", std::string(to_string(a.provenance))},
          {"context_refs", refs},
          {"created_at", a.created_at}};
}

Artifact meta_from_json(const json& j, const fs::path& origin) {
  try {
    Artifact a;
    a.artifact_id = j.at("artifact_id").get<std::string>();
    a.module_tag = j.at("module_tag").get<std::string>();
    const auto kind = parse_artifact_kind(j.at("kind").get<std::string>());
    const auto prov = parse_provenance(j.at("provenance").get<std::string>());
    if (!kind || !prov) throw std::runtime_error("bad kind or provenance");
    a.kind = *kind;
    a.provenance = *prov;
    a.version = j.at("version").get<int>();
    for (const auto& r : j.at("context_refs")) {
      a.context_refs.push_back({r.at("artifact_id").get<std::string>(), r.at("version").get<int>()});
    }
    a.created_at = j.at("created_at").get<std::string>();
    return a;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, "corrupt metadata " + origin.string() + ": " + e.what(),
                {{"path", origin.string()}});
  }
}

Artifact read_meta(const fs::path& dir, int version) {
  const auto path = dir / version_file(version, ".meta.json");
  const auto j = json::parse(util::read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::IoError, "corrupt metadata " + path.string(), {{"path", path.string()}});
  return meta_from_json(j, path);
}

}  // namespace

std::optional<fs::path> Workspace::find_artifact_dir(std::string_view artifact_id) const {
  if (!is_valid_name(artifact_id)) return std::nullopt;
  std::error_code ec;
  for (const auto& tag_dir : fs::directory_iterator(artifacts_dir(), ec)) {
    if (!tag_dir.is_directory()) continue;
    auto candidate = tag_dir.path() / std::string(artifact_id);
    if (fs::is_directory(candidate, ec) && !versions_in(candidate).empty()) return candidate;
  }
  return std::nullopt;
}

std::vector<int> Workspace::versions(std::string_view artifact_id) const {
  const auto dir = find_artifact_dir(artifact_id);
  return dir ? versions_in(*dir) : std::vector<int>{};
}

bool Workspace::exists(const ArtifactRef& ref) const {
  const auto dir = find_artifact_dir(ref.artifact_id);
  if (!dir || ref.version <= 0) return false;
  return fs::exists(*dir / version_file(ref.version, ".meta.json"));
}

Artifact Workspace::save_artifact(const NewArtifact& in) {
  if (!is_valid_name(in.module_tag)) {
    throw Error(ErrorCode::InvalidTag, "invalid module tag '" + in.module_tag + "'", {{"module_tag", in.module_tag}});
  }
  if (!in.artifact_id.empty() && !is_valid_name(in.artifact_id)) {
    throw Error(ErrorCode::InvalidArtifact, "invalid artifact id '" + in.artifact_id + "'");
  }
  if (in.provenance == Provenance::HumanEdited && in.body.empty()) {
    throw Error(ErrorCode::InvalidArtifact, "a human-edited version must have a non-empty body");
  }

  WriteLock lock(*this);

  for (const auto& ref : in.context_refs) {
    if (!exists(ref)) {
      throw Error(ErrorCode::DanglingContextRef,
                  "context reference " + ref.artifact_id + " v" + std::to_string(ref.version) + " does not exist",
                  {{"artifact_id", ref.artifact_id}, {"version", ref.version}});
    }
  }

  Artifact out;
  out.artifact_id = in.artifact_id;
  fs::path dir;
  int version = 1;
  if (out.artifact_id.empty()) {
    do {
      out.artifact_id = util::make_id("art");
    } while (find_artifact_dir(out.artifact_id));
    dir = artifacts_dir() / in.module_tag / out.artifact_id;
  } else if (auto existing = find_artifact_dir(out.artifact_id)) {
    dir = *existing;
    const auto latest = read_meta(dir, versions_in(dir).back());
    if (latest.module_tag != in.module_tag) {
      throw Error(ErrorCode::InvalidTag,
                  "artifact " + out.artifact_id + " belongs to tag '" + latest.module_tag + "'",
                  {{"module_tag", in.module_tag}});
    }
    if (latest.kind != in.kind) {
      throw Error(ErrorCode::InvalidArtifact, "artifact " + out.artifact_id + " has kind " +
                                                  std::string(to_string(latest.kind)));
    }
    version = latest.version + 1;
  } else {
    dir = artifacts_dir() / in.module_tag / out.artifact_id;
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message(), {{"path", dir.string()}});
  if (fs::exists(dir / version_file(version, ".meta.json"))) {
    throw Error(ErrorCode::IoError, "version file already exists in " + dir.string(), {{"path", dir.string()}});
  }

  out.module_tag = in.module_tag;
  out.kind = in.kind;
  out.version = version;
  out.body = in.body;
  out.explanation = in.explanation;
  out.provenance = in.provenance;
  out.context_refs = in.context_refs;
  out.created_at = util::utc_now_iso();

  const bool sync = options_.sync_writes;
  util::atomic_write(dir / version_file(version, ".md"), out.body, sync, options_.rename);
  util::atomic_write(dir / version_file(version, ".explanation.md"), out.explanation, sync, options_.rename);
  util::atomic_write(dir / version_file(version, ".meta.json"), meta_to_json(out).dump(2) + "\n", sync,
                     options_.rename);
  return out;
}

Artifact Workspace::load_artifact(std::string_view artifact_id, std::optional<int> version) const {
  const auto dir = find_artifact_dir(artifact_id);
  if (!dir) {
    throw Error(ErrorCode::UnknownArtifact, "unknown artifact '" + std::string(artifact_id) + "'",
                {{"artifact_id", std::string(artifact_id)}});
  }
  const auto all = versions_in(*dir);
  const int v = version.value_or(all.back());
  if (std::find(all.begin(), all.end(), v) == all.end()) {
    throw Error(ErrorCode::UnknownVersion,
                "artifact '" + std::string(artifact_id) + "' has no version " + std::to_string(v),
                {{"artifact_id", std::string(artifact_id)}, {"version", v}});
  }
  Artifact a = read_meta(*dir, v);
  a.body = util::read_file(*dir / version_file(v, ".md"));
  a.explanation = util::read_file(*dir / version_file(v, ".explanation.md"));
  return a;
}

std::vector<ArtifactSummary> Workspace::list_artifacts(const ArtifactFilter& filter) const {
  std::vector<ArtifactSummary> out;
  std::error_code ec;
  for (const auto& tag_dir : fs::directory_iterator(artifacts_dir(), ec)) {
    if (!tag_dir.is_directory()) continue;
    if (filter.module_tag && tag_dir.path().filename().string() != *filter.module_tag) continue;
    for (const auto& id_dir : fs::directory_iterator(tag_dir.path(), ec)) {
      if (!id_dir.is_directory()) continue;
      const auto all = versions_in(id_dir.path());
      if (all.empty()) continue;
      const auto latest = read_meta(id_dir.path(), all.back());
      if (filter.kind && latest.kind != *filter.kind) continue;
      const auto first = all.front() == latest.version ? latest : read_meta(id_dir.path(), all.front());
      out.push_back({latest.artifact_id, latest.module_tag, latest.kind, latest.version, latest.provenance,
                     first.created_at});
    }
  }
  std::sort(out.begin(), out.end(), [](const ArtifactSummary& a, const ArtifactSummary& b) {
    return std::tie(a.created_at, a.artifact_id) < std::tie(b.created_at, b.artifact_id);
  });
  return out;
}

fs::path Workspace::checked(const fs::path& relative) const {
  const auto norm = relative.lexically_normal();
  if (norm.is_absolute() || norm.empty() || *norm.begin() == "..") {
    throw Error(ErrorCode::InvalidArgument, "path escapes the workspace: " + relative.string());
  }
  return root_ / norm;
}

void Workspace::write_file(const fs::path& relative, std::string_view content) {
  const auto target = checked(relative);
  WriteLock lock(*this);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + target.parent_path().string() + ": " + ec.message());
  util::atomic_write(target, content, options_.sync_writes, options_.rename);
}

void Workspace::append_line(const fs::path& relative, std::string_view line) {
  const auto target = checked(relative);
  WriteLock lock(*this);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  util::append_line(target, line, options_.sync_writes);
}

std::optional<std::string> Workspace::read_file(const fs::path& relative) const {
  const auto target = checked(relative);
  std::error_code ec;
  if (!fs::is_regular_file(target, ec)) return std::nullopt;
  return util::read_file(target);
}

}  // namespace modernkit
