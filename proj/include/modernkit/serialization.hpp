#pragma once

// JSON forms of the domain records, shared by persistence, the CLI's
// --json output and the HTTP service.

#include "modernkit/artifact_store.hpp"
#include "modernkit/llm_gateway.hpp"
#include "modernkit/pipeline.hpp"
#include "modernkit/prompt_library.hpp"
#include "modernkit/scanner.hpp"
#include "modernkit/verifier.hpp"

#include <json.hpp>

namespace modernkit {

using json = nlohmann::json;

void to_json(json& j, const ProjectFile& f);
void from_json(const json& j, ProjectFile& f);
void to_json(json& j, const LayerManifest& m);
void from_json(const json& j, LayerManifest& m);

/// Manifest without file contents: path, size, layer, rule per entry plus
/// per-layer counts.
json manifest_summary(const LayerManifest& m);

void to_json(json& j, const ArtifactRef& r);
void from_json(const json& j, ArtifactRef& r);
void to_json(json& j, const Artifact& a);
void from_json(const json& j, Artifact& a);
void to_json(json& j, const ArtifactSummary& s);
void from_json(const json& j, ArtifactSummary& s);

void to_json(json& j, const StepState& s);
void from_json(const json& j, StepState& s);
void to_json(json& j, const RunSource& s);
void from_json(const json& j, RunSource& s);
void to_json(json& j, const PipelineRun& r);
void from_json(const json& j, PipelineRun& r);
void to_json(json& j, const PromptExchange& e);
void from_json(const json& j, PromptExchange& e);

void to_json(json& j, const PromptTemplate& t);  // summary: no body
void to_json(json& j, const RenderedPrompt& p);
void to_json(json& j, const CompletionResult& r);

void to_json(json& j, const SimilarityReport& r);
void from_json(const json& j, SimilarityReport& r);
void to_json(json& j, const VerificationRecord& r);
void from_json(const json& j, VerificationRecord& r);

}  // namespace modernkit
