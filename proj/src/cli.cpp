#include "modernkit/cli.hpp"

#include "modernkit/error.hpp"
#include "modernkit/http_service.hpp"
#include "modernkit/serialization.hpp"
#include "modernkit/session.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <ostream>

namespace modernkit {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitEngine = 2;

constexpr const char* kGrammar =
    "usage:\n"
    "  modernkit [--workspace DIR] [--json] scan --root DIR\n"
    "  modernkit run create --phase requirements|generation [--tag TAG] [--source ID[@VERSION]]\n"
    "  modernkit run status --run ID\n"
    "  modernkit run list\n"
    "  modernkit run step generate|approve|reject|repair --run ID --step STEP [options]\n"
    "  modernkit verify reverse --artifact ID [--version N] --requirements FILE [--backend ID] [--threshold T]\n"
    "  modernkit verify cross --run ID --step STEP [--backend ID] [--threshold T]\n"
    "  modernkit artifacts list [--tag TAG] [--kind KIND]\n"
    "  modernkit artifacts show --id ID [--version N]\n"
    "  modernkit serve [--port N] [--host HOST] [--allow-remote]\n";

struct Options {
  std::string workspace;
  bool json_output = false;

  std::string root;
  std::string phase;
  std::string tag;
  std::string source;
  std::string run_id;
  std::string step;
  std::string backend;
  std::string edits_file;
  std::string notes_file;
  std::string reviewer;
  std::string note;
  std::string artifact_id;
  int version = 0;
  std::string requirements_file;
  double threshold = -1.0;
  std::string metric;
  std::string kind;
  int port = 8080;
  std::string host = "127.0.0.1";
  bool allow_remote = false;
};

std::string default_workspace() {
  if (const char* env = std::getenv("MODERNKIT_WORKSPACE"); env && *env) return env;
  return ".";
}

StepKind parse_step_arg(const std::string& name) {
  const auto step = parse_step(name);
  if (!step) throw Error(ErrorCode::UnknownStep, "unknown step '" + name + "'", {{"step", name}});
  return *step;
}

std::string read_input_file(const std::string& path) {
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorCode::InvalidArgument, "cannot read '" + path + "'", {{"path", path}});
  }
  return util::read_file(path);
}

Verifier::Options verify_options(const Options& o) {
  Verifier::Options v;
  if (!o.backend.empty()) v.backend_id = o.backend;
  if (o.threshold >= 0.0) v.threshold = o.threshold;
  if (!o.metric.empty()) {
    v.metric = parse_metric(o.metric);
    if (!v.metric) throw Error(ErrorCode::InvalidArgument, "unknown metric '" + o.metric + "'");
  }
  return v;
}

void print_manifest(std::ostream& out, const LayerManifest& m) {
  out << "Scanned " << m.entries.size() << " files under " << m.scan_root << "\n";
  for (auto layer : kAllLayers) out << "  " << std::left << std::setw(14) << to_string(layer) << m.count(layer) << "\n";
}

void print_run(std::ostream& out, const PipelineRun& run) {
  out << run.run_id << "  " << to_string(run.phase) << "  tag=" << run.module_tag << "\n";
  if (run.source.artifact) {
    out << "  source: " << run.source.artifact->artifact_id << " v" << run.source.artifact->version << "\n";
  } else {
    out << "  source: " << run.source.scan_root << " (" << run.source.file_count << " files)\n";
  }
  for (const auto& st : run.steps) {
    out << "  " << std::left << std::setw(16) << to_string(st.step) << std::setw(10) << to_string(st.status);
    if (st.artifact) out << st.artifact->artifact_id << " v" << st.artifact->version;
    if (st.attempt_count > 0) out << "  attempts=" << st.attempt_count;
    out << "\n";
  }
}

void print_artifact_header(std::ostream& out, const Artifact& a) {
  out << a.artifact_id << " v" << a.version << "  " << to_string(a.kind) << "  tag=" << a.module_tag << "  "
      << to_string(a.provenance) << "\n";
}

void print_report(std::ostream& out, const VerificationRecord& r) {
  out << r.record_id << "  " << to_string(r.kind) << "  " << r.artifact.artifact_id << " v" << r.artifact.version
      << "\n  " << to_string(r.report.metric) << " score " << std::fixed << std::setprecision(4) << r.report.score
      << " (threshold " << r.report.threshold << ") " << (r.report.passed ? "PASS" : "BELOW THRESHOLD") << "\n";
  out.unsetf(std::ios::floatfield);
  if (!r.report.missing_tokens.empty()) out << "  missing: " << util::join(r.report.missing_tokens, " ") << "\n";
}

template <typename T, typename Human>
void emit(std::ostream& out, const Options& o, const T& value, Human human) {
  if (o.json_output) {
    out << json(value).dump(2) << "\n";
  } else {
    human(out, value);
  }
}

int execute(CLI::App& app, const Options& o, std::ostream& out) {
  const auto* cmd = app.get_subcommands().front();
  const auto name = cmd->get_name();

  if (name == "scan") {
    auto ws = Workspace::create(o.workspace);
    const auto config = AppConfig::load(ws.config_path());
    const auto manifest = scan_repository(o.root, config.scan);
    ws.write_file(kManifestFile, json(manifest).dump() + "\n");
    if (o.json_output) {
      out << manifest_summary(manifest).dump(2) << "\n";
    } else {
      print_manifest(out, manifest);
    }
    return kExitOk;
  }

  if (name == "serve") {
    auto session = Session::open(o.workspace);
    HttpService service(*session);
    const int port = service.bind(o.host, o.port, o.allow_remote);
    out << "listening on http://" << o.host << ":" << port << "\n" << std::flush;
    return service.listen() ? kExitOk : kExitEngine;
  }

  auto session = Session::open(o.workspace);
  auto& engine = session->engine();
  const auto* sub = cmd->get_subcommands().empty() ? nullptr : cmd->get_subcommands().front();
  const std::string action = sub ? sub->get_name() : "";

  if (name == "run" && action == "create") {
    const auto phase = parse_phase(o.phase);
    if (!phase) throw Error(ErrorCode::InvalidArgument, "unknown phase '" + o.phase + "'");
    RunSourceInput input;
    input.module_tag = o.tag;
    if (*phase == PhaseKind::RequirementsExtraction) {
      input.manifest = session->manifest();
    } else if (!o.source.empty()) {
      const auto at = o.source.find('@');
      input.artifact_id = o.source.substr(0, at);
      if (at != std::string::npos) {
        try {
          input.artifact_version = std::stoi(o.source.substr(at + 1));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidArgument, "invalid source version in '" + o.source + "'");
        }
      }
    }
    emit(out, o, engine.create_run(*phase, input), print_run);
    return kExitOk;
  }
  if (name == "run" && action == "status") {
    emit(out, o, engine.run_status(o.run_id), print_run);
    return kExitOk;
  }
  if (name == "run" && action == "list") {
    emit(out, o, engine.list_runs(), [](std::ostream& os, const std::vector<PipelineRun>& runs) {
      for (const auto& r : runs) print_run(os, r);
      if (runs.empty()) os << "no runs\n";
    });
    return kExitOk;
  }
  if (name == "run" && action == "step") {
    const auto* verb_cmd = sub->get_subcommands().front();
    const auto verb = verb_cmd->get_name();
    const auto step = parse_step_arg(o.step);
    if (verb == "generate") {
      GenerateOptions g;
      if (!o.backend.empty()) g.backend_id = o.backend;
      if (!o.notes_file.empty()) g.operator_notes = read_input_file(o.notes_file);
      emit(out, o, engine.generate_step(o.run_id, step, g), [](std::ostream& os, const Artifact& a) {
        print_artifact_header(os, a);
        os << "\n" << a.body << "\n";
      });
      return kExitOk;
    }
    if (verb == "repair") {
      std::optional<std::string> backend;
      if (!o.backend.empty()) backend = o.backend;
      emit(out, o, engine.repair_artifact(o.run_id, step, backend), [](std::ostream& os, const Artifact& a) {
        print_artifact_header(os, a);
        os << "\n" << a.body << "\n";
      });
      return kExitOk;
    }
    ReviewDecision d;
    d.run_id = o.run_id;
    d.step = step;
    d.verdict = verb == "approve" ? Verdict::Approve : Verdict::Reject;
    if (!o.edits_file.empty()) d.edited_content = read_input_file(o.edits_file);
    d.reviewer = o.reviewer;
    if (!o.note.empty()) d.note = o.note;
    emit(out, o, engine.submit_review(d), [](std::ostream& os, const StepState& st) {
      os << to_string(st.step) << " " << to_string(st.status);
      if (st.artifact) os << "  " << st.artifact->artifact_id << " v" << st.artifact->version;
      os << "\n";
    });
    return kExitOk;
  }

  if (name == "verify" && action == "reverse") {
    std::optional<int> version;
    if (o.version > 0) version = o.version;
    const auto record = session->verifier().reverse_verify(o.artifact_id, version,
                                                           read_input_file(o.requirements_file), verify_options(o));
    emit(out, o, record, print_report);
    return kExitOk;
  }
  if (name == "verify" && action == "cross") {
    const auto record = session->verifier().cross_model_verify(o.run_id, parse_step_arg(o.step), verify_options(o));
    emit(out, o, record, print_report);
    return kExitOk;
  }

  if (name == "artifacts" && action == "list") {
    ArtifactFilter filter;
    if (!o.tag.empty()) filter.module_tag = o.tag;
    if (!o.kind.empty()) {
      filter.kind = parse_artifact_kind(o.kind);
      if (!filter.kind) throw Error(ErrorCode::InvalidArgument, "unknown artifact kind '" + o.kind + "'");
    }
    emit(out, o, session->workspace().list_artifacts(filter),
         [](std::ostream& os, const std::vector<ArtifactSummary>& list) {
           for (const auto& s : list) {
             os << s.artifact_id << "  v" << s.latest_version << "  " << to_string(s.kind) << "  tag=" << s.module_tag
                << "  " << to_string(s.provenance) << "\n";
           }
           if (list.empty()) os << "no artifacts\n";
         });
    return kExitOk;
  }
  if (name == "artifacts" && action == "show") {
    std::optional<int> version;
    if (o.version > 0) version = o.version;
    emit(out, o, session->workspace().load_artifact(o.artifact_id, version), [](std::ostream& os, const Artifact& a) {
      print_artifact_header(os, a);
      os << "\n" << a.body << "\n";
      if (!a.explanation.empty()) os << "\n## Explanation\n\n" << a.explanation << "\n";
    });
    return kExitOk;
  }

  throw Error(ErrorCode::UsageError, "incomplete command");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  o.workspace = default_workspace();

  CLI::App app{"Legacy application modernization workbench", "modernkit"};
  app.require_subcommand(1);
  app.add_option("--workspace,-w", o.workspace, "Workspace directory (default: $MODERNKIT_WORKSPACE or .)");
  app.add_flag("--json", o.json_output, "Machine-readable output");
  app.fallthrough();

  auto* scan = app.add_subcommand("scan", "Classify a repository into layers and store the manifest");
  scan->add_option("--root", o.root, "Repository to scan")->required();

  auto* run = app.add_subcommand("run", "Pipeline runs");
  run->require_subcommand(1);
  auto* create = run->add_subcommand("create", "Start a run");
  create->add_option("--phase", o.phase, "requirements | generation")->required();
  create->add_option("--tag", o.tag, "Module tag (requirements runs)");
  create->add_option("--source", o.source, "Approved consolidation artifact ID[@VERSION] (generation runs)");
  run->add_subcommand("status", "Show a run")->add_option("--run", o.run_id)->required();
  run->add_subcommand("list", "List runs");
  auto* step = run->add_subcommand("step", "Act on one step");
  step->require_subcommand(1);
  for (const char* verb : {"generate", "approve", "reject", "repair"}) {
    auto* v = step->add_subcommand(verb);
    v->add_option("--run", o.run_id)->required();
    v->add_option("--step", o.step)->required();
    if (std::string_view(verb) == "generate" || std::string_view(verb) == "repair") {
      v->add_option("--backend", o.backend, "Backend id");
    }
    if (std::string_view(verb) == "generate") {
      v->add_option("--notes", o.notes_file, "File with extra requirements (Consolidate only)");
    }
    if (std::string_view(verb) == "approve" || std::string_view(verb) == "reject") {
      v->add_option("--reviewer", o.reviewer);
      v->add_option("--note", o.note);
    }
    if (std::string_view(verb) == "approve") v->add_option("--edits", o.edits_file, "Approve this edited content");
  }

  auto* verify = app.add_subcommand("verify", "Advisory verification");
  verify->require_subcommand(1);
  auto* reverse = verify->add_subcommand("reverse", "Recover requirements from code and compare");
  reverse->add_option("--artifact", o.artifact_id)->required();
  reverse->add_option("--version", o.version);
  reverse->add_option("--requirements", o.requirements_file, "Original requirements file")->required();
  auto* cross = verify->add_subcommand("cross", "Replay a step on a second backend and compare");
  cross->add_option("--run", o.run_id)->required();
  cross->add_option("--step", o.step)->required();
  for (auto* v : {reverse, cross}) {
    v->add_option("--backend", o.backend);
    v->add_option("--threshold", o.threshold)->check(CLI::Range(0.0, 1.0));
    v->add_option("--metric", o.metric)->check(CLI::IsMember({"jaccard", "tfidf_cosine"}));
  }

  auto* artifacts = app.add_subcommand("artifacts", "Stored artifacts");
  artifacts->require_subcommand(1);
  auto* list = artifacts->add_subcommand("list");
  list->add_option("--tag", o.tag);
  list->add_option("--kind", o.kind);
  auto* show = artifacts->add_subcommand("show");
  show->add_option("--id", o.artifact_id)->required();
  show->add_option("--version", o.version);

  auto* serve = app.add_subcommand("serve", "HTTP service");
  serve->add_option("--port", o.port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", o.host);
  serve->add_flag("--allow-remote", o.allow_remote, "Permit binding a non-loopback address");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const auto message = std::string(e.what());
    if (o.json_output) {
      err << json{{"code", "UsageError"}, {"message", message}, {"detail", nullptr}}.dump() << "\n";
    } else {
      err << "error: " << message << "\n" << kGrammar;
    }
    return kExitUsage;
  }

  try {
    return execute(app, o, out);
  } catch (const Error& e) {
    if (o.json_output) {
      err << json{{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}}.dump()
          << "\n";
    } else {
      err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
      if (e.code() == ErrorCode::UsageError) err << kGrammar;
    }
    const auto cls = error_class(e.code());
    return cls == ErrorClass::Validation ? kExitUsage : kExitEngine;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitEngine;
  }
}

}  // namespace modernkit
