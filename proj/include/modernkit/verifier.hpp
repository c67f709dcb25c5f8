#pragma once

#include "modernkit/artifact_store.hpp"
#include "modernkit/llm_gateway.hpp"
#include "modernkit/prompt_library.hpp"
#include "modernkit/steps.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modernkit {

class PipelineEngine;

enum class SimilarityMetric { Jaccard, TfidfCosine };

std::string_view to_string(SimilarityMetric metric);
std::optional<SimilarityMetric> parse_metric(std::string_view name);

inline constexpr double kDefaultSimilarityThreshold = 0.75;
inline constexpr std::size_t kMissingTokensCap = 50;

struct SimilarityReport {
  double score = 0.0;
  double threshold = kDefaultSimilarityThreshold;
  bool passed = false;  // score >= threshold
  SimilarityMetric metric = SimilarityMetric::Jaccard;
  std::size_t left_token_count = 0;
  std::size_t right_token_count = 0;
  std::vector<std::string> missing_tokens;  // in left, absent from right; first-seen order, capped

  bool operator==(const SimilarityReport&) const = default;
};

enum class VerificationKind { Reverse, Cross };

std::string_view to_string(VerificationKind kind);

struct VerificationRecord {
  std::string record_id;
  VerificationKind kind = VerificationKind::Reverse;
  ArtifactRef artifact;
  std::optional<std::string> run_id;  // cross verification only
  std::optional<StepKind> step;       // cross verification only
  std::string regenerated_text;
  SimilarityReport report;
  std::string backend_id;
  std::string created_at;

  bool operator==(const VerificationRecord&) const = default;
};

/// The shipped stop-word list.
const std::vector<std::string>& stop_words();

/// Lowercases, splits on runs of non-alphanumeric characters and drops
/// tokens shorter than two characters and stop words.
std::vector<std::string> normalize_tokens(std::string_view text);

/// |set(L) ∩ set(R)| / |set(L) ∪ set(R)|; 1.0 when both are empty.
double jaccard_similarity(const std::vector<std::string>& left, const std::vector<std::string>& right);

/// Cosine of tf-idf vectors with idf computed over exactly the two inputs,
/// idf(t) = ln(3 / (1 + df(t))) + 1. 1.0 when both are empty, 0.0 when
/// exactly one is.
double tfidf_cosine_similarity(const std::vector<std::string>& left, const std::vector<std::string>& right);

double similarity_score(std::string_view left, std::string_view right, SimilarityMetric metric);

SimilarityReport compare_texts(std::string_view left, std::string_view right, SimilarityMetric metric,
                               double threshold);

struct VerifierSettings {
  SimilarityMetric metric = SimilarityMetric::Jaccard;
  double threshold = kDefaultSimilarityThreshold;
  std::string secondary_backend;
};

/// Reverse-generation and cross-model checks. Reports are advisory: nothing
/// here reads or changes step status.
class Verifier {
 public:
  Verifier(Workspace& workspace, const LlmGateway& gateway, const PromptLibrary& prompts,
           const PipelineEngine& engine, VerifierSettings settings = {});

  struct Options {
    std::optional<std::string> backend_id;
    std::optional<double> threshold;
    std::optional<SimilarityMetric> metric;
  };

  /// Asks a model to recover requirements from a generated artifact and
  /// scores them against `original_requirements`.
  VerificationRecord reverse_verify(const std::string& artifact_id, std::optional<int> version,
                                    const std::string& original_requirements, const Options& options = {});

  /// Replays the step's recorded prompts on a second backend and scores the
  /// two sets of outputs against each other.
  VerificationRecord cross_model_verify(const std::string& run_id, StepKind step, const Options& options = {});

  std::vector<VerificationRecord> list_records(const std::optional<std::string>& artifact_id = std::nullopt) const;

  const VerifierSettings& settings() const { return settings_; }

 private:
  VerificationRecord persist(VerificationRecord record);
  double resolve_threshold(const Options& options) const;

  Workspace& workspace_;
  const LlmGateway& gateway_;
  const PromptLibrary& prompts_;
  const PipelineEngine& engine_;
  VerifierSettings settings_;
};

}  // namespace modernkit
