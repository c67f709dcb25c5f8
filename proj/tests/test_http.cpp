#include "support.hpp"

#include "modernkit/http_service.hpp"
#include "modernkit/serialization.hpp"
#include "modernkit/session.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

using namespace modernkit;
using testing_support::fixtures_dir;
using testing_support::TempDir;
using testing_support::write_text;

namespace {

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto root = dir / "ws";
    auto ws = Workspace::create(root, WorkspaceOptions{false});
    const auto transcripts = fixtures_dir() / "transcripts";
    json config = {{"llm",
                    {{"backends",
                      {{"primary", {{"kind", "stub"}, {"endpoint", (transcripts / "primary.transcript").string()}}},
                       {"secondary",
                        {{"kind", "stub"}, {"endpoint", (transcripts / "secondary.transcript").string()}}}}}}},
                   {"pipeline", {{"backend", "primary"}}}};
    write_text(root / "config.json", config.dump());
    session = Session::open(root, WorkspaceOptions{false});
    service = std::make_unique<HttpService>(*session);
    port = service->bind("127.0.0.1", 0);
    server = std::thread([this] { service->listen(); });
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(30, 0);
  }

  void TearDown() override {
    service->stop();
    server.join();
  }

  std::pair<int, json> get(const std::string& path) {
    auto res = client->Get(path);
    if (!res) return {0, nullptr};
    return {res->status, res->body.empty() ? json() : json::parse(res->body)};
  }

  std::pair<int, json> post(const std::string& path, const json& body) {
    auto res = client->Post(path, body.dump(), "application/json");
    if (!res) return {0, nullptr};
    return {res->status, res->body.empty() ? json() : json::parse(res->body)};
  }

  std::string requirements_run() {
    session->store_manifest(testing_support::petclinic_manifest());
    auto [status, body] = post("/runs", {{"phase", "RequirementsExtraction"}});
    EXPECT_EQ(status, 201);
    return body["run_id"];
  }

  TempDir dir;
  std::unique_ptr<Session> session;
  std::unique_ptr<HttpService> service;
  std::unique_ptr<httplib::Client> client;
  std::thread server;
  int port = 0;
};

}  // namespace

TEST_F(HttpTest, CreateRunNeedsManifest) {
  auto [status, body] = post("/runs", {{"phase", "RequirementsExtraction"}});
  EXPECT_EQ(status, 409);
  EXPECT_EQ(body["code"], "MissingSource");
  auto [s2, b2] = get("/manifest");
  EXPECT_EQ(s2, 404);
  EXPECT_EQ(b2["code"], "NotFound");
}

TEST_F(HttpTest, RunLifecycle) {
  const auto run_id = requirements_run();
  auto [s1, run] = get("/runs/" + run_id);
  EXPECT_EQ(s1, 200);
  EXPECT_EQ(run.get<PipelineRun>().steps.size(), 4u);

  auto [s2, gen] = post("/runs/" + run_id + "/steps/InteractionReq/generate", json::object());
  ASSERT_EQ(s2, 200) << gen.dump();
  EXPECT_EQ(gen["run"]["steps"][0]["status"], "Generated");
  EXPECT_EQ(gen["artifact"]["kind"], "InteractionReq");

  auto [s3, ex] = get("/runs/" + run_id + "/steps/InteractionReq/exchanges");
  EXPECT_EQ(s3, 200);
  EXPECT_GE(ex.size(), 2u);

  const std::string edited = "Edited interaction requirements\n";
  auto [s4, reviewed] = post("/runs/" + run_id + "/steps/InteractionReq/review",
                             {{"verdict", "Approve"}, {"edited_content", edited}, {"reviewer", "ana"}});
  ASSERT_EQ(s4, 200) << reviewed.dump();
  const auto id = gen["artifact"]["artifact_id"].get<std::string>();
  auto [s5, latest] = get("/artifacts/" + id + "/latest");
  EXPECT_EQ(s5, 200);
  EXPECT_EQ(latest["body"], edited);
  EXPECT_EQ(latest["version"], 2);
  auto [s6, versions] = get("/artifacts/" + id);
  EXPECT_EQ(s6, 200);
  EXPECT_EQ(versions.size(), 2u);
  auto [s7, list] = get("/artifacts?kind=InteractionReq");
  EXPECT_EQ(s7, 200);
  EXPECT_EQ(list.size(), 1u);
  auto [s8, runs] = get("/runs");
  EXPECT_EQ(runs.size(), 1u);
}

TEST_F(HttpTest, GateErrorsAreConflicts) {
  const auto run_id = requirements_run();
  auto [s1, b1] = post("/runs/" + run_id + "/steps/InteractionReq/review", {{"verdict", "Approve"}});
  EXPECT_EQ(s1, 409);
  EXPECT_EQ(b1["code"], "StepNotGenerated");
  EXPECT_TRUE(b1.contains("message"));
  auto [s2, b2] = post("/runs/" + run_id + "/steps/Consolidate/generate", json::object());
  EXPECT_EQ(s2, 409);
  EXPECT_EQ(b2["code"], "OutOfOrder");
  auto [s3, b3] = get("/runs/run-nope");
  EXPECT_EQ(s3, 404);
  EXPECT_EQ(b3["code"], "UnknownRun");
  auto [s4, b4] = post("/runs/" + run_id + "/steps/InteractionReq/review", {{"verdict", "Maybe"}});
  EXPECT_EQ(s4, 400);
  auto [s5, b5] = get("/no/such/route");
  EXPECT_EQ(s5, 404);
  EXPECT_EQ(b5["code"], "NotFound");
}

TEST_F(HttpTest, MalformedBody) {
  auto res = client->Post("/runs", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(HttpTest, ManifestAndVerify) {
  const auto run_id = requirements_run();
  auto [s1, m] = get("/manifest");
  EXPECT_EQ(s1, 200);
  EXPECT_EQ(m["file_count"], 24);
  ASSERT_EQ(post("/runs/" + run_id + "/steps/InteractionReq/generate", json::object()).first, 200);
  auto [s2, rec] = post("/verify/cross", {{"run_id", run_id}, {"step", "InteractionReq"}, {"backend_id", "secondary"}});
  ASSERT_EQ(s2, 200) << rec.dump();
  EXPECT_EQ(rec["report"]["score"], 1.0);
  auto [s3, recs] = get("/verifications?artifact_id=" + rec["artifact"]["artifact_id"].get<std::string>());
  EXPECT_EQ(s3, 200);
  EXPECT_EQ(recs.size(), 1u);
  auto [s4, same] = post("/verify/cross", {{"run_id", run_id}, {"step", "InteractionReq"}, {"backend_id", "primary"}});
  EXPECT_EQ(s4, 400);
  EXPECT_EQ(same["code"], "SameBackend");
}

TEST(HttpBind, RemoteRefusedWithoutFlag) {
  TempDir dir;
  Workspace::create(dir / "ws", WorkspaceOptions{false});
  auto session = Session::open(dir / "ws", WorkspaceOptions{false});
  HttpService service(*session);
  EXPECT_THROW(service.bind("0.0.0.0", 0), Error);
  EXPECT_TRUE(is_loopback_host("127.0.0.1"));
  EXPECT_TRUE(is_loopback_host("localhost"));
  EXPECT_TRUE(is_loopback_host("::1"));
  EXPECT_FALSE(is_loopback_host("10.0.0.5"));
}
