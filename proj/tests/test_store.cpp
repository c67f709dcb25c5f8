#include "support.hpp"

#include "modernkit/error.hpp"
#include "modernkit/serialization.hpp"

#include <gtest/gtest.h>

#include <regex>
#include <thread>

using namespace modernkit;
using testing_support::TempDir;

namespace {

NewArtifact make(std::string id, std::string tag = "app", ArtifactKind kind = ArtifactKind::Consolidate) {
  NewArtifact a;
  a.artifact_id = std::move(id);
  a.module_tag = std::move(tag);
  a.kind = kind;
  a.body = "body";
  a.explanation = "why";
  return a;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Store, LayoutAndMarker) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws");
  for (const char* sub : {"runs", "artifacts", "verifications", "templates"}) {
    EXPECT_TRUE(std::filesystem::is_directory(dir / "ws" / sub)) << sub;
  }
  const auto marker = json::parse(util::read_file(dir / "ws/workspace.json"));
  EXPECT_EQ(marker["format_version"], 1);
  EXPECT_TRUE(std::filesystem::exists(dir / "ws/config.json"));
  EXPECT_EQ(code_of([&] { Workspace::open(dir / "nope"); }), ErrorCode::WorkspaceNotFound);
  EXPECT_NO_THROW(Workspace::open(dir / "ws"));
}

TEST(Store, ConsecutiveVersions) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws", {false});
  EXPECT_EQ(ws.save_artifact(make("A")).version, 1);
  EXPECT_EQ(ws.save_artifact(make("A")).version, 2);
  EXPECT_EQ(ws.save_artifact(make("A")).version, 3);
  EXPECT_EQ(ws.load_artifact("A").version, 3);
  EXPECT_EQ(ws.versions("A"), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(code_of([&] { ws.load_artifact("A", 99); }), ErrorCode::UnknownVersion);
  EXPECT_EQ(code_of([&] { ws.load_artifact("B"); }), ErrorCode::UnknownArtifact);
}

TEST(Store, GeneratedIds) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws", {false});
  const auto a = ws.save_artifact(make(""));
  const auto b = ws.save_artifact(make(""));
  EXPECT_NE(a.artifact_id, b.artifact_id);
  EXPECT_EQ(a.artifact_id.rfind("art-", 0), 0u);
}

TEST(Store, RoundTripExact) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws", {false});
  const auto base = ws.save_artifact(make("base"));
  auto a = make("X");
  a.body = "line1\r\n\ttabbed \xe2\x82\xac\n\n```\ncode\n```\n  trailing  ";
  a.explanation = "";
  a.provenance = Provenance::LlmRepaired;
  a.context_refs = {base.ref()};
  const auto saved = ws.save_artifact(a);
  const auto loaded = ws.load_artifact("X", 1);
  EXPECT_EQ(loaded, saved);
  EXPECT_EQ(loaded.body, a.body);
  EXPECT_EQ(loaded.explanation, "");
  EXPECT_EQ(loaded.provenance, Provenance::LlmRepaired);
  EXPECT_EQ(loaded.context_refs, a.context_refs);

  const auto meta = json::parse(util::read_file(dir / "ws/artifacts/app/X/v1.meta.json"));
  std::set<std::string> keys;
  for (const auto& [k, v] : meta.items()) keys.insert(k);
  EXPECT_EQ(keys, (std::set<std::string>{"artifact_id", "module_tag", "kind", "version", "provenance", "context_refs",
                                         "created_at"}));
  EXPECT_EQ(util::read_file(dir / "ws/artifacts/app/X/v1.md"), a.body);
}

TEST(Store, Validation) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws", {false});
  EXPECT_EQ(code_of([&] { ws.save_artifact(make("A", "")); }), ErrorCode::InvalidTag);
  EXPECT_EQ(code_of([&] { ws.save_artifact(make("A", "../escape")); }), ErrorCode::InvalidTag);
  auto dangling = make("A");
  dangling.context_refs = {{"ghost", 1}};
  EXPECT_EQ(code_of([&] { ws.save_artifact(dangling); }), ErrorCode::DanglingContextRef);
  ws.save_artifact(make("A"));
  auto bad_ref = make("B");
  bad_ref.context_refs = {{"A", 2}};
  EXPECT_EQ(code_of([&] { ws.save_artifact(bad_ref); }), ErrorCode::DanglingContextRef);
  auto human = make("A");
  human.provenance = Provenance::HumanEdited;
  human.body = "";
  EXPECT_EQ(code_of([&] { ws.save_artifact(human); }), ErrorCode::InvalidArtifact);
  EXPECT_EQ(code_of([&] { ws.save_artifact(make("A", "other")); }), ErrorCode::InvalidTag);
  EXPECT_EQ(code_of([&] { ws.save_artifact(make("A", "app", ArtifactKind::ApiCode)); }), ErrorCode::InvalidArtifact);
  EXPECT_EQ(ws.versions("A").size(), 1u);
}

TEST(Store, InterruptedSaveLeavesNoVersion) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws", {false});
  ws.save_artifact(make("A"));
  ws.set_rename_hook([](const std::filesystem::path& from, const std::filesystem::path& to) {
    if (to.string().ends_with(".meta.json")) throw Error(ErrorCode::IoError, "simulated crash");
    util::default_rename(from, to);
  });
  EXPECT_EQ(code_of([&] { ws.save_artifact(make("A")); }), ErrorCode::IoError);
  EXPECT_EQ(ws.versions("A"), std::vector<int>{1});
  EXPECT_EQ(ws.load_artifact("A").version, 1);
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "ws")) {
    EXPECT_EQ(e.path().filename().string().find(".tmp"), std::string::npos) << e.path();
  }
  ws.set_rename_hook(util::default_rename);
  EXPECT_EQ(ws.save_artifact(make("A")).version, 2);
}

TEST(Store, ListAndFilter) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws", {false});
  EXPECT_TRUE(ws.list_artifacts().empty());
  ws.save_artifact(make("a1", "billing", ArtifactKind::Consolidate));
  ws.save_artifact(make("a2", "billing", ArtifactKind::ApiCode));
  ws.save_artifact(make("a3", "app", ArtifactKind::Consolidate));
  ws.save_artifact(make("a1", "billing", ArtifactKind::Consolidate));

  const auto all = ws.list_artifacts();
  ASSERT_EQ(all.size(), 3u);
  for (std::size_t i = 1; i < all.size(); ++i) {
    EXPECT_LE(std::tie(all[i - 1].created_at, all[i - 1].artifact_id), std::tie(all[i].created_at, all[i].artifact_id));
  }
  const auto billing = ws.list_artifacts({std::string("billing"), std::nullopt});
  EXPECT_EQ(billing.size(), 2u);
  const auto consolidations = ws.list_artifacts({std::nullopt, ArtifactKind::Consolidate});
  EXPECT_EQ(consolidations.size(), 2u);
  const auto both = ws.list_artifacts({std::string("billing"), ArtifactKind::Consolidate});
  ASSERT_EQ(both.size(), 1u);
  EXPECT_EQ(both[0].artifact_id, "a1");
  EXPECT_EQ(both[0].latest_version, 2);
}

TEST(Store, RelativeFilesStayInside) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws", {false});
  ws.write_file("runs/r/run.json", "{}");
  EXPECT_EQ(ws.read_file("runs/r/run.json"), std::optional<std::string>("{}"));
  EXPECT_FALSE(ws.read_file("runs/none.json").has_value());
  EXPECT_EQ(code_of([&] { ws.write_file("../outside.txt", "x"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { ws.write_file("/etc/passwd", "x"); }), ErrorCode::InvalidArgument);
  ws.append_line("runs/r/events.log", "one");
  ws.append_line("runs/r/events.log", "two");
  EXPECT_EQ(ws.read_file("runs/r/events.log"), std::optional<std::string>("one\ntwo\n"));
}

TEST(Store, ConcurrentSavesGetDistinctVersions) {
  TempDir dir;
  auto ws = Workspace::create(dir / "ws", {false});
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 10; ++i) ws.save_artifact(make("shared"));
    });
  }
  for (auto& t : threads) t.join();
  const auto v = ws.versions("shared");
  ASSERT_EQ(v.size(), 40u);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(v[static_cast<std::size_t>(i)], i + 1);
}

TEST(Util, Utf8AndIds) {
  EXPECT_TRUE(util::is_valid_utf8("plain \xc3\xa9"));
  EXPECT_FALSE(util::is_valid_utf8("\xff"));
  EXPECT_FALSE(util::is_valid_utf8("\xc3"));
  EXPECT_FALSE(util::is_valid_utf8("\xed\xa0\x80"));  // surrogate
  const auto id = util::make_id("run");
  EXPECT_TRUE(std::regex_match(id, std::regex(R"(run-\d{8}T\d{6}-[0-9a-f]{6})"))) << id;
  EXPECT_TRUE(std::regex_match(util::utc_now_iso(), std::regex(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\d\.\d{3}Z)")));
}
