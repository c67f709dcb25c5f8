#include "modernkit/verifier.hpp"

#include "modernkit/error.hpp"
#include "modernkit/pipeline.hpp"
#include "modernkit/resources.hpp"
#include "modernkit/serialization.hpp"
#include "modernkit/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

namespace modernkit {

namespace fs = std::filesystem;

std::string_view to_string(SimilarityMetric metric) {
  return metric == SimilarityMetric::Jaccard ? "jaccard" : "tfidf_cosine";
}

std::optional<SimilarityMetric> parse_metric(std::string_view name) {
  if (name == "jaccard") return SimilarityMetric::Jaccard;
  if (name == "tfidf_cosine") return SimilarityMetric::TfidfCosine;
  return std::nullopt;
}

std::string_view to_string(VerificationKind kind) { return kind == VerificationKind::Reverse ? "reverse" : "cross"; }

const std::vector<std::string>& stop_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> out;
    const auto data = resources::find("stopwords.txt");
    if (!data) return out;
    for (const auto& line : util::split_lines(*data)) {
      const auto w = util::trim(line);
      if (!w.empty() && w.front() != '#') out.emplace_back(w);
    }
    return out;
  }();
  return words;
}

std::vector<std::string> normalize_tokens(std::string_view text) {
  static const std::unordered_set<std::string> stops(stop_words().begin(), stop_words().end());
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (current.size() >= 2 && !stops.contains(current)) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

double jaccard_similarity(const std::vector<std::string>& left, const std::vector<std::string>& right) {
  const std::set<std::string> l(left.begin(), left.end());
  const std::set<std::string> r(right.begin(), right.end());
  if (l.empty() && r.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : l) common += r.count(t);
  const auto uni = l.size() + r.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

double tfidf_cosine_similarity(const std::vector<std::string>& left, const std::vector<std::string>& right) {
  if (left.empty() && right.empty()) return 1.0;
  if (left.empty() || right.empty()) return 0.0;
  std::map<std::string, std::pair<double, double>> tf;
  for (const auto& t : left) tf[t].first += 1.0;
  for (const auto& t : right) tf[t].second += 1.0;

  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [term, counts] : tf) {
    const int df = (counts.first > 0 ? 1 : 0) + (counts.second > 0 ? 1 : 0);
    const double idf = std::log(3.0 / (1.0 + df)) + 1.0;
    const double a = counts.first * idf;
    const double b = counts.second * idf;
    dot += a * b;
    na += a * a;
    nb += b * b;
  }
  if (dot == na && na == nb) return 1.0;
  const double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 0.0;
  return std::clamp(dot / denom, 0.0, 1.0);
}

double similarity_score(std::string_view left, std::string_view right, SimilarityMetric metric) {
  const auto l = normalize_tokens(left);
  const auto r = normalize_tokens(right);
  return metric == SimilarityMetric::Jaccard ? jaccard_similarity(l, r) : tfidf_cosine_similarity(l, r);
}

SimilarityReport compare_texts(std::string_view left, std::string_view right, SimilarityMetric metric,
                               double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must be in [0,1]", {{"threshold", threshold}});
  }
  const auto l = normalize_tokens(left);
  const auto r = normalize_tokens(right);
  SimilarityReport report;
  report.metric = metric;
  report.threshold = threshold;
  report.score = metric == SimilarityMetric::Jaccard ? jaccard_similarity(l, r) : tfidf_cosine_similarity(l, r);
  report.passed = report.score >= threshold;
  report.left_token_count = l.size();
  report.right_token_count = r.size();

  const std::unordered_set<std::string> right_set(r.begin(), r.end());
  std::unordered_set<std::string> seen;
  for (const auto& t : l) {
    if (report.missing_tokens.size() >= kMissingTokensCap) break;
    if (!right_set.contains(t) && seen.insert(t).second) report.missing_tokens.push_back(t);
  }
  return report;
}

namespace {

bool is_code_kind(ArtifactKind kind) {
  const auto step = step_of(kind);
  return step && phase_of(*step) == PhaseKind::ApplicationGeneration;
}

// An exhausted retry budget where every failure was a blank or truncated
// answer counts as an empty regeneration rather than an error.
bool only_empty_answers(const Error& e) {
  if (e.code() != ErrorCode::ExhaustedRetries) return false;
  const auto& last = e.detail().value("last_error", json::object());
  return last.value("code", std::string()) == to_string(ErrorCode::IncompleteResponse) &&
         last.value("empty", false);
}

Error gateway_failure(const Error& cause) {
  return Error(ErrorCode::GatewayFailure, cause.what(),
               {{"cause", std::string(to_string(cause.code()))}, {"detail", cause.detail()}});
}

}  // namespace

Verifier::Verifier(Workspace& workspace, const LlmGateway& gateway, const PromptLibrary& prompts,
                   const PipelineEngine& engine, VerifierSettings settings)
    : workspace_(workspace), gateway_(gateway), prompts_(prompts), engine_(engine), settings_(std::move(settings)) {}

double Verifier::resolve_threshold(const Options& options) const {
  const double t = options.threshold.value_or(settings_.threshold);
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be in [0,1]", {{"threshold", t}});
  return t;
}

VerificationRecord Verifier::persist(VerificationRecord record) {
  record.record_id = util::make_id("ver");
  record.created_at = util::utc_now_iso();
  workspace_.write_file(fs::path("verifications") / (record.record_id + ".json"), json(record).dump(2) + "\n");
  return record;
}

VerificationRecord Verifier::reverse_verify(const std::string& artifact_id, std::optional<int> version,
                                            const std::string& original_requirements, const Options& options) {
  const double threshold = resolve_threshold(options);
  const auto metric = options.metric.value_or(settings_.metric);
  const auto artifact = workspace_.load_artifact(artifact_id, version);
  if (!is_code_kind(artifact.kind)) {
    throw Error(ErrorCode::InvalidArgument,
                "reverse verification needs generated code, not a " + std::string(to_string(artifact.kind)) +
                    " artifact",
                {{"artifact_id", artifact.artifact_id}, {"kind", std::string(to_string(artifact.kind))}});
  }
  const auto backend = options.backend_id && !options.backend_id->empty() ? *options.backend_id
                       : !settings_.secondary_backend.empty()            ? settings_.secondary_backend
                                                                         : engine_.resolve_backend(std::nullopt);
  if (!gateway_.has_backend(backend)) {
    throw Error(ErrorCode::UnknownBackend, "unknown backend '" + backend + "'", {{"backend_id", backend}});
  }

  const auto rendered = prompts_.render("reverse_requirements", {{"artifact", artifact.body}});
  std::vector<std::string> texts;
  for (const auto& part : rendered.parts) {
    CompletionRequest req;
    req.prompt = part;
    req.backend_id = backend;
    req.temperature = engine_.settings().temperature;
    req.max_output_tokens = engine_.settings().max_output_tokens;
    req.timeout_seconds = gateway_.timeout_seconds(backend);
    try {
      texts.push_back(gateway_.complete(req).text);
    } catch (const Error& e) {
      if (only_empty_answers(e)) {
        texts.emplace_back();
        continue;
      }
      if (error_class(e.code()) == ErrorClass::Upstream) throw gateway_failure(e);
      throw;
    }
  }

  VerificationRecord record;
  record.kind = VerificationKind::Reverse;
  record.artifact = artifact.ref();
  record.regenerated_text = util::join(texts, "\n\n");
  while (!record.regenerated_text.empty() && record.regenerated_text.back() == '\n') record.regenerated_text.pop_back();
  record.report = compare_texts(original_requirements, record.regenerated_text, metric, threshold);
  record.backend_id = backend;
  return persist(std::move(record));
}

VerificationRecord Verifier::cross_model_verify(const std::string& run_id, StepKind step, const Options& options) {
  const double threshold = resolve_threshold(options);
  const auto metric = options.metric.value_or(settings_.metric);
  const auto run = engine_.run_status(run_id);
  const auto& st = run.state(step);
  const auto step_name = std::string(to_string(step));
  if ((st.status != StepStatus::Generated && st.status != StepStatus::Approved) || !st.artifact) {
    throw Error(ErrorCode::StepHasNoArtifact,
                "step " + step_name + " is " + std::string(to_string(st.status)) + " and has no artifact to check",
                {{"run_id", run_id}, {"step", step_name}});
  }
  const auto secondary = options.backend_id && !options.backend_id->empty() ? *options.backend_id
                                                                            : settings_.secondary_backend;
  if (secondary.empty()) {
    throw Error(ErrorCode::InvalidArgument, "cross verification needs a secondary backend");
  }
  if (secondary == st.backend_id) {
    throw Error(ErrorCode::SameBackend, "secondary backend must differ from the generating backend '" + secondary + "'",
                {{"backend_id", secondary}});
  }
  if (!gateway_.has_backend(secondary)) {
    throw Error(ErrorCode::UnknownBackend, "unknown backend '" + secondary + "'", {{"backend_id", secondary}});
  }

  std::vector<std::string> primary;
  std::vector<std::string> replay;
  for (const auto& ex : engine_.step_exchanges(run_id, step)) {
    if (ex.failed) continue;
    primary.push_back(ex.response);
    CompletionRequest req;
    req.prompt = ex.prompt;
    req.backend_id = secondary;
    req.temperature = engine_.settings().temperature;
    req.max_output_tokens = engine_.settings().max_output_tokens;
    req.timeout_seconds = gateway_.timeout_seconds(secondary);
    try {
      replay.push_back(gateway_.complete(req).text);
    } catch (const Error& e) {
      if (error_class(e.code()) == ErrorClass::Upstream) throw gateway_failure(e);
      throw;
    }
  }
  std::string left;
  if (primary.empty()) {
    left = workspace_.load_artifact(st.artifact->artifact_id, st.artifact->version).body;
  } else {
    left = util::join(primary, "\n\n");
  }

  VerificationRecord record;
  record.kind = VerificationKind::Cross;
  record.artifact = *st.artifact;
  record.run_id = run_id;
  record.step = step;
  record.regenerated_text = util::join(replay, "\n\n");
  record.report = compare_texts(left, record.regenerated_text, metric, threshold);
  record.backend_id = secondary;
  return persist(std::move(record));
}

std::vector<VerificationRecord> Verifier::list_records(const std::optional<std::string>& artifact_id) const {
  std::vector<VerificationRecord> records;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(workspace_.verifications_dir(), ec)) {
    if (entry.path().extension() != ".json") continue;
    auto record = json::parse(util::read_file(entry.path())).get<VerificationRecord>();
    if (artifact_id && record.artifact.artifact_id != *artifact_id) continue;
    records.push_back(std::move(record));
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.created_at, a.record_id) < std::tie(b.created_at, b.record_id);
  });
  return records;
}

}  // namespace modernkit
