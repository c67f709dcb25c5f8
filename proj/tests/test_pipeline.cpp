#include "gate_model.hpp"
#include "support.hpp"

#include "modernkit/error.hpp"
#include "modernkit/serialization.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

using namespace modernkit;
using testing_support::ScriptedBackend;
using testing_support::Stack;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::InvalidArgument;
}

LayerManifest three_files() {
  LayerManifest m;
  m.scan_root = "/legacy";
  m.entries = {{"application.properties", "server.port=8080", 16, LayerKind::Config},
               {"db/schema.sql", "CREATE TABLE owners (id INT);", 29, LayerKind::Data},
               {"owner/OwnerController.java", "@Controller class OwnerController {}", 36, LayerKind::Interaction}};
  m.rule_hits = {{"application.properties", "extension:.properties"},
                 {"db/schema.sql", "path:db"},
                 {"owner/OwnerController.java", "content:@Controller"}};
  return m;
}

RunSourceInput manifest_source(LayerManifest m = three_files()) {
  RunSourceInput in;
  in.manifest = std::move(m);
  return in;
}

ReviewDecision decision(const std::string& run, StepKind step, Verdict v = Verdict::Approve) {
  ReviewDecision d;
  d.run_id = run;
  d.step = step;
  d.verdict = v;
  d.reviewer = "tester";
  return d;
}

struct Fixture {
  Stack stack;
  ScriptedBackend* backend = nullptr;

  Fixture() {
    auto b = std::make_unique<ScriptedBackend>(std::vector<std::string>{"generated\n## Explanation\nbecause"});
    backend = b.get();
    stack.gateway.register_backend("primary", std::move(b));
  }

  PipelineEngine& engine() { return *stack.engine; }

  std::string approved_phase1(const std::string& consolidate_edit = "") {
    const auto run = engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
    for (auto step : steps_of(PhaseKind::RequirementsExtraction)) {
      engine().generate_step(run.run_id, step);
      auto d = decision(run.run_id, step);
      if (step == StepKind::Consolidate && !consolidate_edit.empty()) d.edited_content = consolidate_edit;
      engine().submit_review(d);
    }
    return run.run_id;
  }

  ArtifactRef consolidation(const std::string& run_id) {
    return *engine().run_status(run_id).state(StepKind::Consolidate).artifact;
  }

  std::string phase2(const ArtifactRef& source) {
    RunSourceInput in;
    in.artifact_id = source.artifact_id;
    in.artifact_version = source.version;
    return engine().create_run(PhaseKind::ApplicationGeneration, in).run_id;
  }
};

}  // namespace

TEST(Pipeline, CreateRequirementsRun) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  ASSERT_EQ(run.steps.size(), 4u);
  const std::vector<StepKind> order = {StepKind::InteractionReq, StepKind::BusinessReq, StepKind::DataConfigReq,
                                       StepKind::Consolidate};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(run.steps[i].step, order[i]);
    EXPECT_EQ(run.steps[i].status, StepStatus::Pending);
    EXPECT_FALSE(run.steps[i].artifact.has_value());
  }
  EXPECT_EQ(run.source.file_count, 3u);
  EXPECT_EQ(f.engine().run_status(run.run_id), run);
  EXPECT_EQ(code_of([&] { f.engine().create_run(PhaseKind::RequirementsExtraction, {}); }), ErrorCode::MissingSource);
}

TEST(Pipeline, CreateGenerationRun) {
  Fixture f;
  const auto p1 = f.approved_phase1();
  const auto run = f.engine().run_status(f.phase2(f.consolidation(p1)));
  ASSERT_EQ(run.steps.size(), 5u);
  const std::vector<StepKind> order = {StepKind::DataModelSql, StepKind::OrmObjects, StepKind::ApiCode,
                                       StepKind::TestCases, StepKind::UiCode};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(run.steps[i].step, order[i]);
    EXPECT_EQ(run.steps[i].status, StepStatus::Pending);
  }
  EXPECT_EQ(run.module_tag, "application");
  EXPECT_EQ(run.source.artifact, f.consolidation(p1));
}

TEST(Pipeline, GenerationNeedsApprovedConsolidation) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  for (auto step : {StepKind::InteractionReq, StepKind::BusinessReq, StepKind::DataConfigReq}) {
    f.engine().generate_step(run.run_id, step);
    f.engine().submit_review(decision(run.run_id, step));
  }
  const auto generated = f.engine().generate_step(run.run_id, StepKind::Consolidate);
  EXPECT_EQ(code_of([&] { f.phase2(generated.ref()); }), ErrorCode::SourceNotApproved);

  const auto layer = *f.engine().run_status(run.run_id).state(StepKind::InteractionReq).artifact;
  EXPECT_EQ(code_of([&] { f.phase2(layer); }), ErrorCode::SourceNotApproved);
  EXPECT_EQ(code_of([&] { f.phase2({"no-such-artifact", 1}); }), ErrorCode::MissingSource);
  EXPECT_EQ(code_of([&] { f.engine().create_run(PhaseKind::ApplicationGeneration, {}); }), ErrorCode::MissingSource);

  f.engine().submit_review(decision(run.run_id, StepKind::Consolidate));
  EXPECT_NO_THROW(f.phase2(generated.ref()));
}

TEST(Pipeline, LayerStepBuildsFromPerFilePrompts) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  const auto art = f.engine().generate_step(run.run_id, StepKind::InteractionReq);
  // One per-file prompt plus the layer summary.
  ASSERT_EQ(f.backend->prompts.size(), 2u);
  EXPECT_NE(f.backend->prompts[0].find("@Controller class OwnerController {}"), std::string::npos);
  EXPECT_NE(f.backend->prompts[1].find("TASK: layer requirements summary"), std::string::npos);
  EXPECT_NE(art.body.find("## File: owner/OwnerController.java"), std::string::npos);
  EXPECT_EQ(art.kind, ArtifactKind::InteractionReq);
  EXPECT_EQ(art.provenance, Provenance::LlmGenerated);
  EXPECT_NE(art.explanation.find("because"), std::string::npos);

  const auto st = f.engine().run_status(run.run_id).state(StepKind::InteractionReq);
  EXPECT_EQ(st.status, StepStatus::Generated);
  EXPECT_EQ(st.attempt_count, 1);
  EXPECT_EQ(st.artifact, art.ref());
  EXPECT_EQ(f.engine().step_exchanges(run.run_id, StepKind::InteractionReq).size(), 2u);
}

TEST(Pipeline, DataConfigStepCoversBothLayers) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  for (auto step : {StepKind::InteractionReq, StepKind::BusinessReq}) {
    f.engine().generate_step(run.run_id, step);
    f.engine().submit_review(decision(run.run_id, step));
  }
  f.backend->prompts.clear();
  const auto art = f.engine().generate_step(run.run_id, StepKind::DataConfigReq);
  EXPECT_NE(art.body.find("## File: application.properties"), std::string::npos);
  EXPECT_NE(art.body.find("## File: db/schema.sql"), std::string::npos);
  EXPECT_EQ(f.backend->prompts.size(), 3u);
}

TEST(Pipeline, EmptyLayerNeedsNoModel) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  f.engine().generate_step(run.run_id, StepKind::InteractionReq);
  f.engine().submit_review(decision(run.run_id, StepKind::InteractionReq));
  f.backend->prompts.clear();
  const auto art = f.engine().generate_step(run.run_id, StepKind::BusinessReq);
  EXPECT_TRUE(f.backend->prompts.empty());
  EXPECT_NE(art.body.find("No files were classified"), std::string::npos);
}

TEST(Pipeline, OrmObjectsContextIsTheDataModel) {
  Fixture f;
  const auto p2 = f.phase2(f.consolidation(f.approved_phase1()));
  const auto model = f.engine().generate_step(p2, StepKind::DataModelSql);
  f.engine().submit_review(decision(p2, StepKind::DataModelSql));
  f.backend->prompts.clear();
  const auto orm = f.engine().generate_step(p2, StepKind::OrmObjects);
  ASSERT_EQ(f.backend->prompts.size(), 1u);
  EXPECT_NE(f.backend->prompts[0].find("TASK: ORM objects"), std::string::npos);
  EXPECT_NE(f.backend->prompts[0].find(model.body), std::string::npos);
  EXPECT_EQ(orm.context_refs, std::vector<ArtifactRef>{model.ref()});
  EXPECT_EQ(f.engine().run_status(p2).state(StepKind::OrmObjects).status, StepStatus::Generated);
}

TEST(Pipeline, OutOfOrderAndAlreadyGenerated) {
  Fixture f;
  const auto p2 = f.phase2(f.consolidation(f.approved_phase1()));
  EXPECT_EQ(code_of([&] { f.engine().generate_step(p2, StepKind::ApiCode); }), ErrorCode::OutOfOrder);
  f.engine().generate_step(p2, StepKind::DataModelSql);
  EXPECT_EQ(code_of([&] { f.engine().generate_step(p2, StepKind::DataModelSql); }), ErrorCode::AlreadyGenerated);
  EXPECT_EQ(code_of([&] { f.engine().generate_step(p2, StepKind::OrmObjects); }), ErrorCode::OutOfOrder);
  f.engine().submit_review(decision(p2, StepKind::DataModelSql));
  EXPECT_EQ(code_of([&] { f.engine().generate_step(p2, StepKind::DataModelSql); }), ErrorCode::AlreadyApproved);
  EXPECT_EQ(code_of([&] { f.engine().generate_step(p2, StepKind::InteractionReq); }), ErrorCode::UnknownStep);
  EXPECT_EQ(code_of([&] { f.engine().generate_step("run-missing", StepKind::DataModelSql); }), ErrorCode::UnknownRun);
}

TEST(Pipeline, RegenerateAfterReject) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  const auto v1 = f.engine().generate_step(run.run_id, StepKind::InteractionReq);
  const auto rejected = f.engine().submit_review(decision(run.run_id, StepKind::InteractionReq, Verdict::Reject));
  EXPECT_EQ(rejected.status, StepStatus::Rejected);
  EXPECT_EQ(rejected.artifact, v1.ref());  // kept for audit

  const auto v2 = f.engine().generate_step(run.run_id, StepKind::InteractionReq);
  EXPECT_EQ(v2.artifact_id, v1.artifact_id);
  EXPECT_EQ(v2.version, 2);
  const auto st = f.engine().run_status(run.run_id).state(StepKind::InteractionReq);
  EXPECT_EQ(st.attempt_count, 2);
  EXPECT_EQ(st.status, StepStatus::Generated);
  EXPECT_EQ(f.stack.workspace.load_artifact(v1.artifact_id, 1).body, v1.body);
}

TEST(Pipeline, ApproveWithEditsFeedsDownstream) {
  Fixture f;
  const std::string edited =
      "# Requirements\n\n1. Register owners.\n\n## Veterinarian Rating\n2. Owners rate a veterinarian from 1 to 5.";
  const auto p1 = f.approved_phase1(edited);
  const auto src = f.consolidation(p1);
  const auto stored = f.stack.workspace.load_artifact(src.artifact_id, src.version);
  EXPECT_EQ(stored.version, 2);
  EXPECT_EQ(stored.provenance, Provenance::HumanEdited);
  EXPECT_EQ(stored.body, edited);
  EXPECT_EQ(stored.context_refs, f.stack.workspace.load_artifact(src.artifact_id, 1).context_refs);

  const auto p2 = f.phase2(src);
  f.backend->prompts.clear();
  const auto model = f.engine().generate_step(p2, StepKind::DataModelSql);
  ASSERT_EQ(f.backend->prompts.size(), 1u);
  EXPECT_NE(f.backend->prompts[0].find("Veterinarian Rating"), std::string::npos);
  EXPECT_EQ(model.context_refs, std::vector<ArtifactRef>{src});
}

TEST(Pipeline, ReviewPreconditions) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  EXPECT_EQ(code_of([&] { f.engine().submit_review(decision(run.run_id, StepKind::InteractionReq)); }),
            ErrorCode::StepNotGenerated);
  f.engine().generate_step(run.run_id, StepKind::InteractionReq);
  auto bad = decision(run.run_id, StepKind::InteractionReq, Verdict::Reject);
  bad.edited_content = "edits";
  EXPECT_EQ(code_of([&] { f.engine().submit_review(bad); }), ErrorCode::InvalidDecision);
  EXPECT_EQ(code_of([&] { f.engine().submit_review(decision("nope", StepKind::InteractionReq)); }),
            ErrorCode::UnknownRun);
  EXPECT_EQ(code_of([&] { f.engine().submit_review(decision(run.run_id, StepKind::ApiCode)); }),
            ErrorCode::UnknownStep);
}

TEST(Pipeline, Repair) {
  Fixture f;
  const auto p2 = f.phase2(f.consolidation(f.approved_phase1()));
  const auto v1 = f.engine().generate_step(p2, StepKind::DataModelSql);
  f.backend->prompts.clear();
  const auto v2 = f.engine().repair_artifact(p2, StepKind::DataModelSql);
  EXPECT_EQ(v2.version, 2);
  EXPECT_EQ(v2.provenance, Provenance::LlmRepaired);
  ASSERT_EQ(f.backend->prompts.size(), 1u);
  EXPECT_NE(f.backend->prompts[0].find("TASK: repair syntax"), std::string::npos);
  EXPECT_NE(f.backend->prompts[0].find(v1.body), std::string::npos);
  EXPECT_EQ(f.engine().run_status(p2).state(StepKind::DataModelSql).status, StepStatus::Generated);
  EXPECT_EQ(f.engine().repair_artifact(p2, StepKind::DataModelSql).version, 3);

  f.engine().submit_review(decision(p2, StepKind::DataModelSql));
  EXPECT_EQ(code_of([&] { f.engine().repair_artifact(p2, StepKind::DataModelSql); }), ErrorCode::StepNotGenerated);
  EXPECT_EQ(f.engine().run_status(p2).state(StepKind::DataModelSql).artifact->version, 3);
}

TEST(Pipeline, GatewayFailureLeavesStepPending) {
  Stack stack;
  stack.gateway.register_backend("down", std::make_unique<ScriptedBackend>(std::vector<std::string>{}, 1000), 1);
  auto& engine = *stack.engine;
  auto m = three_files();
  const auto run = engine.create_run(PhaseKind::RequirementsExtraction, manifest_source(m));
  const auto before = engine.run_status(run.run_id);
  EXPECT_EQ(code_of([&] { engine.generate_step(run.run_id, StepKind::InteractionReq); }), ErrorCode::GatewayFailure);
  EXPECT_EQ(engine.run_status(run.run_id), before);
  EXPECT_TRUE(stack.workspace.list_artifacts().empty());
}

TEST(Pipeline, PerFileFailureBecomesPlaceholder) {
  Stack stack;
  // The first file fails through the whole retry budget; the rest succeed.
  stack.gateway.register_backend("flaky", std::make_unique<ScriptedBackend>(std::vector<std::string>{"fine"}, 2), 1);
  auto m = three_files();
  m.entries.push_back({"web/Second.java", "class Second {}", 15, LayerKind::Interaction});
  auto& engine = *stack.engine;
  const auto run = engine.create_run(PhaseKind::RequirementsExtraction, manifest_source(m));
  const auto art = engine.generate_step(run.run_id, StepKind::InteractionReq);
  EXPECT_NE(art.body.find("GENERATION FAILED"), std::string::npos);
  EXPECT_NE(art.body.find("## File: web/Second.java\n\nfine"), std::string::npos);
  const auto ex = engine.step_exchanges(run.run_id, StepKind::InteractionReq);
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_TRUE(ex[0].failed);
}

TEST(Pipeline, ChunkedContextRunsSequentially) {
  Fixture f;
  std::string big;
  for (int i = 0; i < 60; ++i) big += "Requirement " + std::to_string(i) + " with some descriptive words.\n\n";
  const auto p2 = f.phase2(f.consolidation(f.approved_phase1(big)));
  f.stack.prompts.set_max_context_chars(1200);
  f.backend->prompts.clear();
  const auto art = f.engine().generate_step(p2, StepKind::DataModelSql);
  ASSERT_GT(f.backend->prompts.size(), 1u);
  for (std::size_t i = 0; i < f.backend->prompts.size(); ++i) {
    EXPECT_NE(f.backend->prompts[i].find("[Input part " + std::to_string(i + 1) + " of"), std::string::npos);
  }
  std::string expected;
  for (std::size_t i = 0; i < f.backend->prompts.size(); ++i) expected += (i ? "\n\n" : "") + std::string("generated");
  EXPECT_EQ(art.body, expected);
}

TEST(Pipeline, OperatorNotesAtConsolidate) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  for (auto step : {StepKind::InteractionReq, StepKind::BusinessReq, StepKind::DataConfigReq}) {
    GenerateOptions bad;
    bad.operator_notes = "x";
    EXPECT_EQ(code_of([&] { f.engine().generate_step(run.run_id, step, bad); }), ErrorCode::InvalidArgument);
    f.engine().generate_step(run.run_id, step);
    f.engine().submit_review(decision(run.run_id, step));
  }
  f.backend->prompts.clear();
  GenerateOptions notes;
  notes.operator_notes = "Support a Veterinarian Rating feature.";
  const auto art = f.engine().generate_step(run.run_id, StepKind::Consolidate, notes);
  ASSERT_EQ(f.backend->prompts.size(), 1u);
  EXPECT_NE(f.backend->prompts[0].find("Support a Veterinarian Rating feature."), std::string::npos);
  EXPECT_NE(f.backend->prompts[0].find("the entire application"), std::string::npos);
  EXPECT_EQ(art.context_refs.size(), 3u);
}

TEST(Pipeline, ContextRefsWereApprovedWhenUsed) {
  Fixture f;
  const auto p1 = f.approved_phase1();
  const auto p2 = f.phase2(f.consolidation(p1));
  for (auto step : steps_of(PhaseKind::ApplicationGeneration)) {
    f.engine().generate_step(p2, step);
    f.engine().submit_review(decision(p2, step));
  }
  std::set<ArtifactRef> approved;
  for (const auto& r : f.engine().list_runs()) {
    for (const auto& st : r.steps) {
      if (st.status == StepStatus::Approved) approved.insert(*st.artifact);
    }
  }
  for (const auto& r : f.engine().list_runs()) {
    for (const auto& st : r.steps) {
      const auto a = f.stack.workspace.load_artifact(st.artifact->artifact_id, st.artifact->version);
      for (const auto& ref : a.context_refs) EXPECT_TRUE(approved.contains(ref));
    }
  }
  EXPECT_EQ(f.engine().list_runs().size(), 2u);
}

TEST(Pipeline, ModuleScope) {
  Fixture f;
  auto src = manifest_source();
  src.module_tag = "owners";
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, src);
  for (auto step : steps_of(PhaseKind::RequirementsExtraction)) {
    f.engine().generate_step(run.run_id, step);
    f.engine().submit_review(decision(run.run_id, step));
  }
  EXPECT_NE(f.backend->prompts.back().find("the 'owners' module"), std::string::npos);
  const auto p2 = f.engine().run_status(f.phase2(f.consolidation(run.run_id)));
  EXPECT_EQ(p2.module_tag, "owners");
  EXPECT_EQ(f.stack.workspace.list_artifacts({std::string("owners"), std::nullopt}).size(), 4u);

  src.module_tag = "bad/tag";
  EXPECT_EQ(code_of([&] { f.engine().create_run(PhaseKind::RequirementsExtraction, src); }), ErrorCode::InvalidTag);
}

TEST(Pipeline, EventsAreLogged) {
  Fixture f;
  const auto p1 = f.approved_phase1();
  const auto log = f.stack.workspace.read_file(std::filesystem::path("runs") / p1 / "events.log");
  ASSERT_TRUE(log.has_value());
  const auto lines = util::split_lines(*log);
  ASSERT_GE(lines.size(), 9u);
  EXPECT_EQ(json::parse(lines[0])["event"], "create");
  EXPECT_EQ(json::parse(lines[1])["event"], "generate");
  EXPECT_EQ(json::parse(lines[2])["event"], "approve");
}

TEST(Pipeline, SameRunIsSerialized) {
  Fixture f;
  const auto run = f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source());
  std::atomic<int> ok{0};
  std::atomic<int> already{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&] {
      try {
        f.engine().generate_step(run.run_id, StepKind::InteractionReq);
        ++ok;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::AlreadyGenerated) ++already;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(already.load(), 3);
  EXPECT_EQ(f.stack.workspace.versions(f.engine().run_status(run.run_id).state(StepKind::InteractionReq).artifact->artifact_id).size(), 1u);
}

TEST(Pipeline, DistinctRunsProceedConcurrently) {
  Fixture f;
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(f.engine().create_run(PhaseKind::RequirementsExtraction, manifest_source()).run_id);
  std::vector<std::thread> threads;
  for (const auto& id : ids) {
    threads.emplace_back([&f, id] {
      for (auto step : steps_of(PhaseKind::RequirementsExtraction)) {
        f.engine().generate_step(id, step);
        f.engine().submit_review(decision(id, step));
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& id : ids) {
    for (const auto& st : f.engine().run_status(id).steps) EXPECT_EQ(st.status, StepStatus::Approved);
  }
}

TEST(Pipeline, GateInvariantProperty) {
  const auto report = testing_support::run_gate_property(200, 14, 2024);
  EXPECT_EQ(report.sequences, 200);
  EXPECT_GT(report.accepted, 0);
  EXPECT_GT(report.rejected, 0);
  for (const auto& v : report.violations) ADD_FAILURE() << v;
}

TEST(Pipeline, RunJsonRoundTrip) {
  Fixture f;
  const auto p1 = f.approved_phase1();
  const auto run = f.engine().run_status(p1);
  EXPECT_EQ(json(run).get<PipelineRun>(), run);
}
