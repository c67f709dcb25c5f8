#include "modernkit/pipeline.hpp"

#include "modernkit/error.hpp"
#include "modernkit/serialization.hpp"
#include "modernkit/util.hpp"

#include <algorithm>

namespace modernkit {

namespace fs = std::filesystem;

std::string_view to_string(StepStatus status) {
  switch (status) {
    case StepStatus::Pending: return "Pending";
    case StepStatus::Generated: return "Generated";
    case StepStatus::Approved: return "Approved";
    case StepStatus::Rejected: return "Rejected";
  }
  return "Pending";
}

std::optional<StepStatus> parse_step_status(std::string_view name) {
  for (auto s : {StepStatus::Pending, StepStatus::Generated, StepStatus::Approved, StepStatus::Rejected}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view to_string(Verdict verdict) { return verdict == Verdict::Approve ? "Approve" : "Reject"; }

std::optional<Verdict> parse_verdict(std::string_view name) {
  if (name == "Approve" || name == "approve") return Verdict::Approve;
  if (name == "Reject" || name == "reject") return Verdict::Reject;
  return std::nullopt;
}

bool PipelineRun::has_step(StepKind step) const {
  return std::any_of(steps.begin(), steps.end(), [&](const StepState& s) { return s.step == step; });
}

const StepState& PipelineRun::state(StepKind step) const {
  for (const auto& s : steps) {
    if (s.step == step) return s;
  }
  throw Error(ErrorCode::UnknownStep,
              "step " + std::string(to_string(step)) + " is not part of a " + std::string(to_string(phase)) + " run",
              {{"run_id", run_id}, {"step", std::string(to_string(step))}});
}

StepState& PipelineRun::state(StepKind step) {
  return const_cast<StepState&>(static_cast<const PipelineRun&>(*this).state(step));
}

namespace {

fs::path run_dir(const std::string& run_id) { return fs::path("runs") / run_id; }

std::string layer_title(StepKind step) {
  switch (step) {
    case StepKind::InteractionReq: return "Interaction";
    case StepKind::BusinessReq: return "Business logic";
    case StepKind::DataConfigReq: return "Data and configuration";
    default: return std::string(to_string(step));
  }
}

std::vector<LayerKind> layers_for(StepKind step) {
  switch (step) {
    case StepKind::InteractionReq: return {LayerKind::Interaction};
    case StepKind::BusinessReq: return {LayerKind::BusinessLogic};
    case StepKind::DataConfigReq: return {LayerKind::Data, LayerKind::Config};
    default: return {};
  }
}

bool is_layer_step(StepKind step) { return !layers_for(step).empty(); }

Error gateway_failure(const Error& cause) {
  return Error(ErrorCode::GatewayFailure, cause.what(),
               {{"cause", std::string(to_string(cause.code()))}, {"detail", cause.detail()}});
}

json event(std::string_view name, const std::string& run_id) {
  return {{"event", std::string(name)}, {"run_id", run_id}, {"at", util::utc_now_iso()}};
}

}  // namespace

PipelineEngine::PipelineEngine(Workspace& workspace, const LlmGateway& gateway, const PromptLibrary& prompts,
                               EngineSettings settings)
    : workspace_(workspace), gateway_(gateway), prompts_(prompts), settings_(std::move(settings)) {}

std::shared_ptr<std::mutex> PipelineEngine::run_mutex(const std::string& run_id) const {
  std::lock_guard lock(locks_guard_);
  auto& m = run_locks_[run_id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

PipelineRun PipelineEngine::load_run(const std::string& run_id) const {
  if (!is_valid_name(run_id)) throw Error(ErrorCode::UnknownRun, "unknown run '" + run_id + "'", {{"run_id", run_id}});
  const auto text = workspace_.read_file(run_dir(run_id) / "run.json");
  if (!text) throw Error(ErrorCode::UnknownRun, "unknown run '" + run_id + "'", {{"run_id", run_id}});
  try {
    return json::parse(*text).get<PipelineRun>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "corrupt run state for " + run_id + ": " + e.what(), {{"run_id", run_id}});
  }
}

void PipelineEngine::store_run(PipelineRun& run, const json& ev) {
  run.updated_at = util::utc_now_iso();
  workspace_.write_file(run_dir(run.run_id) / "run.json", json(run).dump(2) + "\n");
  workspace_.append_line(run_dir(run.run_id) / "events.log", ev.dump());
}

std::string PipelineEngine::resolve_backend(const std::optional<std::string>& requested) const {
  if (requested && !requested->empty()) return *requested;
  if (!settings_.default_backend.empty()) return settings_.default_backend;
  const auto ids = gateway_.backend_ids();
  if (ids.size() == 1) return ids.front();
  throw Error(ErrorCode::UnknownBackend,
              ids.empty() ? "no LLM backend is registered" : "several backends are registered; choose one",
              {{"backends", ids}});
}

bool PipelineEngine::is_approved_consolidation(const ArtifactRef& ref) const {
  for (const auto& run : list_runs()) {
    if (run.phase != PhaseKind::RequirementsExtraction) continue;
    const auto& st = run.state(StepKind::Consolidate);
    if (st.status == StepStatus::Approved && st.artifact && *st.artifact == ref) return true;
  }
  return false;
}

PipelineRun PipelineEngine::create_run(PhaseKind phase, const RunSourceInput& source) {
  PipelineRun run;
  run.phase = phase;

  if (phase == PhaseKind::RequirementsExtraction) {
    if (!source.manifest) throw Error(ErrorCode::MissingSource, "a requirements run needs a scanned manifest");
    run.module_tag = source.module_tag.empty() ? settings_.default_module_tag : source.module_tag;
    if (!is_valid_name(run.module_tag)) {
      throw Error(ErrorCode::InvalidTag, "invalid module tag '" + run.module_tag + "'", {{"module_tag", run.module_tag}});
    }
    run.source.scan_root = source.manifest->scan_root;
    run.source.file_count = source.manifest->entries.size();
  } else {
    if (!source.artifact_id || source.artifact_id->empty()) {
      throw Error(ErrorCode::MissingSource, "a generation run needs a consolidated requirements artifact");
    }
    Artifact src;
    try {
      src = workspace_.load_artifact(*source.artifact_id, source.artifact_version);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownArtifact && e.code() != ErrorCode::UnknownVersion) throw;
      throw Error(ErrorCode::MissingSource, e.what(), {{"artifact_id", *source.artifact_id}});
    }
    if (src.kind != ArtifactKind::Consolidate) {
      throw Error(ErrorCode::SourceNotApproved,
                  "artifact " + src.artifact_id + " is a " + std::string(to_string(src.kind)) +
                      " artifact, not consolidated requirements",
                  {{"artifact_id", src.artifact_id}, {"version", src.version}});
    }
    if (!is_approved_consolidation(src.ref())) {
      throw Error(ErrorCode::SourceNotApproved,
                  "artifact " + src.artifact_id + " v" + std::to_string(src.version) + " has not been approved",
                  {{"artifact_id", src.artifact_id}, {"version", src.version}});
    }
    run.module_tag = src.module_tag;
    run.source.artifact = src.ref();
  }

  for (auto step : steps_of(phase)) {
    StepState st;
    st.step = step;
    run.steps.push_back(std::move(st));
  }
  run.created_at = util::utc_now_iso();

  do {
    run.run_id = util::make_id("run");
  } while (workspace_.read_file(run_dir(run.run_id) / "run.json"));

  auto lock = run_mutex(run.run_id);
  std::lock_guard guard(*lock);
  if (source.manifest && phase == PhaseKind::RequirementsExtraction) {
    workspace_.write_file(run_dir(run.run_id) / "manifest.json", json(*source.manifest).dump() + "\n");
  }
  auto ev = event("create", run.run_id);
  ev["phase"] = std::string(to_string(phase));
  ev["module_tag"] = run.module_tag;
  store_run(run, ev);
  return run;
}

PipelineRun PipelineEngine::run_status(const std::string& run_id) const { return load_run(run_id); }

std::vector<PipelineRun> PipelineEngine::list_runs() const {
  std::vector<PipelineRun> runs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(workspace_.runs_dir(), ec)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "run.json")) continue;
    runs.push_back(load_run(entry.path().filename().string()));
  }
  std::sort(runs.begin(), runs.end(), [](const PipelineRun& a, const PipelineRun& b) {
    return std::tie(a.created_at, a.run_id) < std::tie(b.created_at, b.run_id);
  });
  return runs;
}

LayerManifest PipelineEngine::run_manifest(const std::string& run_id) const {
  const auto run = load_run(run_id);
  const auto text = workspace_.read_file(run_dir(run_id) / "manifest.json");
  if (!text) throw Error(ErrorCode::MissingSource, "run " + run_id + " has no manifest", {{"run_id", run_id}});
  return json::parse(*text).get<LayerManifest>();
}

std::vector<PromptExchange> PipelineEngine::step_exchanges(const std::string& run_id, StepKind step) const {
  const auto run = load_run(run_id);
  const auto& st = run.state(step);
  if (st.attempt_count == 0) return {};
  const auto name = std::string(to_string(step)) + ".attempt" + std::to_string(st.attempt_count) + ".json";
  const auto text = workspace_.read_file(run_dir(run_id) / "prompts" / name);
  if (!text) return {};
  return json::parse(*text).get<std::vector<PromptExchange>>();
}

std::pair<CompletionResult, std::vector<PromptExchange>> PipelineEngine::complete_rendered(
    const RenderedPrompt& rendered, const std::string& backend, const std::string& label) const {
  CompletionResult combined;
  combined.backend_id = backend;
  std::vector<PromptExchange> exchanges;
  std::vector<std::string> texts;
  std::vector<std::string> explanations;
  for (const auto& part : rendered.parts) {
    CompletionRequest req;
    req.prompt = part;
    req.backend_id = backend;
    req.temperature = settings_.temperature;
    req.max_output_tokens = settings_.max_output_tokens;
    req.timeout_seconds = gateway_.timeout_seconds(backend);
    auto result = gateway_.complete(req);
    exchanges.push_back({label, rendered.template_id, part, result.text, result.explanation, false});
    texts.push_back(result.text);
    if (!result.explanation.empty()) explanations.push_back(result.explanation);
    combined.attempts += result.attempts;
    combined.duration_ms += result.duration_ms;
  }
  combined.text = util::join(texts, "\n\n");
  combined.explanation = util::join(explanations, "\n\n");
  return {std::move(combined), std::move(exchanges)};
}

PipelineEngine::StepOutput PipelineEngine::produce_layer(const PipelineRun& run, StepKind step,
                                                         const std::string& backend) const {
  const auto manifest = run_manifest(run.run_id);
  const auto layers = layers_for(step);
  std::vector<ProjectFile> files;
  for (const auto& f : manifest.entries) {
    if (std::find(layers.begin(), layers.end(), f.layer) != layers.end()) files.push_back(f);
  }

  StepOutput out;
  const auto title = layer_title(step);
  if (files.empty()) {
    out.body = "# " + title + " layer requirements\n\nNo files were classified into this layer.";
    out.explanation = "The repository scan assigned no files to this layer, so nothing was sent to the model.";
    return out;
  }

  std::string sections;
  std::string file_explanations;
  std::size_t succeeded = 0;
  std::optional<Error> last_failure;
  for (const auto& file : files) {
    sections += "## File: " + file.relative_path + "\n\n";
    if (util::trim(file.content).empty()) {
      sections += "_Empty file; no requirements._\n\n";
      continue;
    }
    const auto rendered = prompts_.render(
        "per_file_requirements",
        {{"file_path", file.relative_path}, {"file_content", file.content}});
    try {
      auto [result, exchanges] = complete_rendered(rendered, backend, file.relative_path);
      sections += result.text + "\n\n";
      if (!result.explanation.empty()) {
        file_explanations += "### " + file.relative_path + "\n\n" + result.explanation + "\n\n";
      }
      out.exchanges.insert(out.exchanges.end(), exchanges.begin(), exchanges.end());
      ++succeeded;
    } catch (const Error& e) {
      if (error_class(e.code()) != ErrorClass::Upstream) throw;
      last_failure = e;
      sections += "> GENERATION FAILED for this file (" + std::string(to_string(e.code())) + "): " + e.what() +
                  "\n> Regenerate the step or write these requirements by hand during review.\n\n";
      out.exchanges.push_back({file.relative_path, rendered.template_id, rendered.text, "", e.what(), true});
    }
  }
  if (succeeded == 0 && last_failure) throw *last_failure;
  while (!sections.empty() && sections.back() == '\n') sections.pop_back();

  std::string summary;
  std::string summary_explanation;
  {
    const auto rendered = prompts_.render("layer_requirements", {{"layer", title}, {"file_requirements", sections}});
    auto [result, exchanges] = complete_rendered(rendered, backend, "layer summary");
    summary = result.text;
    summary_explanation = result.explanation;
    out.exchanges.insert(out.exchanges.end(), exchanges.begin(), exchanges.end());
  }

  out.body = "# " + title + " layer requirements\n\n" + summary + "\n\n" + sections;
  out.explanation = summary_explanation;
  if (!file_explanations.empty()) {
    if (!out.explanation.empty()) out.explanation += "\n\n";
    out.explanation += "## Per-file notes\n\n" + file_explanations;
    while (!out.explanation.empty() && out.explanation.back() == '\n') out.explanation.pop_back();
  }
  return out;
}

PipelineEngine::StepOutput PipelineEngine::produce_from_context(const PipelineRun& run, StepKind step,
                                                                const std::string& backend,
                                                                const std::string& operator_notes) const {
  StepOutput out;
  const auto approved = [&](StepKind s) {
    const auto& st = run.state(s);
    return workspace_.load_artifact(st.artifact->artifact_id, st.artifact->version);
  };
  const auto source = [&]() { return workspace_.load_artifact(run.source.artifact->artifact_id, run.source.artifact->version); };

  std::string template_id;
  PromptContext context;
  const auto use = [&](const Artifact& a, const std::string& placeholder) {
    context[placeholder] = a.body;
    out.context_refs.push_back(a.ref());
  };

  switch (step) {
    case StepKind::Consolidate: {
      template_id = "consolidate_requirements";
      std::string combined;
      for (auto s : {StepKind::InteractionReq, StepKind::BusinessReq, StepKind::DataConfigReq}) {
        const auto a = approved(s);
        if (!combined.empty()) combined += "\n\n";
        combined += a.body;
        out.context_refs.push_back(a.ref());
      }
      if (!util::trim(operator_notes).empty()) {
        combined += "\n\n# Additional requirements\n\n" + operator_notes;
      }
      context["layer_requirements"] = combined;
      context["scope"] = run.module_tag == settings_.default_module_tag
                             ? std::string("the entire application")
                             : "the '" + run.module_tag + "' module";
      break;
    }
    case StepKind::DataModelSql:
      template_id = "data_model_sql";
      use(source(), "requirements");
      break;
    case StepKind::OrmObjects:
      template_id = "orm_objects";
      use(approved(StepKind::DataModelSql), "data_model");
      break;
    case StepKind::ApiCode:
      template_id = "api_code";
      use(approved(StepKind::OrmObjects), "orm_objects");
      break;
    case StepKind::TestCases:
      template_id = "test_cases";
      use(approved(StepKind::ApiCode), "api_code");
      break;
    case StepKind::UiCode:
      template_id = "ui_code";
      use(source(), "requirements");
      break;
    default:
      throw Error(ErrorCode::UnknownStep, "no context rule for step " + std::string(to_string(step)));
  }

  const auto rendered = prompts_.render(template_id, context);
  auto [result, exchanges] = complete_rendered(rendered, backend, std::string(to_string(step)));
  out.body = std::move(result.text);
  out.explanation = std::move(result.explanation);
  out.exchanges = std::move(exchanges);
  return out;
}

Artifact PipelineEngine::generate_step(const std::string& run_id, StepKind step, const GenerateOptions& options) {
  auto lock = run_mutex(run_id);
  std::lock_guard guard(*lock);

  auto run = load_run(run_id);
  auto& st = run.state(step);
  const auto step_name = std::string(to_string(step));
  if (st.status == StepStatus::Approved) {
    throw Error(ErrorCode::AlreadyApproved, "step " + step_name + " is already approved",
                {{"run_id", run_id}, {"step", step_name}});
  }
  if (st.status == StepStatus::Generated) {
    throw Error(ErrorCode::AlreadyGenerated, "step " + step_name + " is awaiting review",
                {{"run_id", run_id}, {"step", step_name}});
  }
  for (const auto& earlier : run.steps) {
    if (earlier.step == step) break;
    if (earlier.status != StepStatus::Approved) {
      throw Error(ErrorCode::OutOfOrder,
                  "step " + step_name + " needs " + std::string(to_string(earlier.step)) + " to be approved first",
                  {{"run_id", run_id}, {"step", step_name}, {"blocking_step", std::string(to_string(earlier.step))}});
    }
  }
  if (!options.operator_notes.empty() && step != StepKind::Consolidate) {
    throw Error(ErrorCode::InvalidArgument, "operator notes apply to the Consolidate step only");
  }
  const auto backend = resolve_backend(options.backend_id);
  if (!gateway_.has_backend(backend)) {
    throw Error(ErrorCode::UnknownBackend, "unknown backend '" + backend + "'", {{"backend_id", backend}});
  }

  StepOutput output;
  try {
    output = is_layer_step(step) ? produce_layer(run, step, backend)
                                 : produce_from_context(run, step, backend, options.operator_notes);
  } catch (const Error& e) {
    if (error_class(e.code()) != ErrorClass::Upstream || e.code() == ErrorCode::GatewayFailure) throw;
    auto ev = event("generate_failed", run_id);
    ev["step"] = step_name;
    ev["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    workspace_.append_line(run_dir(run_id) / "events.log", ev.dump());
    throw gateway_failure(e);
  }

  NewArtifact na;
  if (st.artifact) na.artifact_id = st.artifact->artifact_id;
  na.module_tag = run.module_tag;
  na.kind = artifact_kind_of(step);
  na.body = std::move(output.body);
  na.explanation = std::move(output.explanation);
  na.provenance = Provenance::LlmGenerated;
  na.context_refs = std::move(output.context_refs);
  const auto saved = workspace_.save_artifact(na);

  st.status = StepStatus::Generated;
  st.artifact = saved.ref();
  st.attempt_count += 1;
  st.backend_id = backend;

  const auto exchanges_name = step_name + ".attempt" + std::to_string(st.attempt_count) + ".json";
  workspace_.write_file(run_dir(run_id) / "prompts" / exchanges_name, json(output.exchanges).dump(2) + "\n");

  auto ev = event("generate", run_id);
  ev["step"] = step_name;
  ev["artifact"] = saved.ref();
  ev["attempt"] = st.attempt_count;
  ev["backend_id"] = backend;
  ev["context_refs"] = saved.context_refs;
  store_run(run, ev);
  return saved;
}

StepState PipelineEngine::submit_review(const ReviewDecision& decision) {
  auto lock = run_mutex(decision.run_id);
  std::lock_guard guard(*lock);

  auto run = load_run(decision.run_id);
  auto& st = run.state(decision.step);
  const auto step_name = std::string(to_string(decision.step));
  if (st.status != StepStatus::Generated) {
    throw Error(ErrorCode::StepNotGenerated,
                "step " + step_name + " is " + std::string(to_string(st.status)) + ", not Generated",
                {{"run_id", decision.run_id}, {"step", step_name}, {"status", std::string(to_string(st.status))}});
  }
  if (decision.edited_content && decision.verdict != Verdict::Approve) {
    throw Error(ErrorCode::InvalidDecision, "edited content is only allowed with an Approve verdict");
  }
  if (decision.edited_content && util::trim(*decision.edited_content).empty()) {
    throw Error(ErrorCode::InvalidDecision, "edited content must not be empty");
  }

  auto ev = event(decision.verdict == Verdict::Approve ? "approve" : "reject", decision.run_id);
  ev["step"] = step_name;
  ev["reviewer"] = decision.reviewer.empty() ? std::string("operator") : decision.reviewer;
  ev["decided_at"] = decision.decided_at.empty() ? util::utc_now_iso() : decision.decided_at;
  if (decision.note) ev["note"] = *decision.note;

  if (decision.verdict == Verdict::Approve) {
    if (decision.edited_content) {
      const auto current = workspace_.load_artifact(st.artifact->artifact_id, st.artifact->version);
      NewArtifact na;
      na.artifact_id = current.artifact_id;
      na.module_tag = current.module_tag;
      na.kind = current.kind;
      na.body = *decision.edited_content;
      na.explanation = current.explanation;
      na.provenance = Provenance::HumanEdited;
      na.context_refs = current.context_refs;
      const auto saved = workspace_.save_artifact(na);
      st.artifact = saved.ref();
      ev["edited"] = true;
    }
    st.status = StepStatus::Approved;
  } else {
    st.status = StepStatus::Rejected;
  }
  ev["artifact"] = *st.artifact;
  store_run(run, ev);
  return st;
}

Artifact PipelineEngine::repair_artifact(const std::string& run_id, StepKind step,
                                         const std::optional<std::string>& backend_id) {
  auto lock = run_mutex(run_id);
  std::lock_guard guard(*lock);

  auto run = load_run(run_id);
  auto& st = run.state(step);
  const auto step_name = std::string(to_string(step));
  if (st.status != StepStatus::Generated) {
    throw Error(ErrorCode::StepNotGenerated,
                "step " + step_name + " is " + std::string(to_string(st.status)) + ", not Generated",
                {{"run_id", run_id}, {"step", step_name}, {"status", std::string(to_string(st.status))}});
  }
  const auto backend = backend_id && !backend_id->empty() ? *backend_id : st.backend_id;
  if (!gateway_.has_backend(backend)) {
    throw Error(ErrorCode::UnknownBackend, "unknown backend '" + backend + "'", {{"backend_id", backend}});
  }

  const auto current = workspace_.load_artifact(st.artifact->artifact_id, st.artifact->version);
  const auto rendered = prompts_.render("repair_syntax", {{"artifact_kind", step_name}, {"artifact", current.body}});
  CompletionResult result;
  try {
    result = complete_rendered(rendered, backend, "repair").first;
  } catch (const Error& e) {
    if (error_class(e.code()) != ErrorClass::Upstream) throw;
    throw gateway_failure(e);
  }

  NewArtifact na;
  na.artifact_id = current.artifact_id;
  na.module_tag = current.module_tag;
  na.kind = current.kind;
  na.body = std::move(result.text);
  na.explanation = result.explanation.empty() ? current.explanation : result.explanation;
  na.provenance = Provenance::LlmRepaired;
  na.context_refs = current.context_refs;
  const auto saved = workspace_.save_artifact(na);
  st.artifact = saved.ref();

  auto ev = event("repair", run_id);
  ev["step"] = step_name;
  ev["artifact"] = saved.ref();
  ev["backend_id"] = backend;
  store_run(run, ev);
  return saved;
}

}  // namespace modernkit
