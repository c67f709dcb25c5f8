#include "modernkit/steps.hpp"

namespace modernkit {

std::span<const StepKind> steps_of(PhaseKind phase) {
  if (phase == PhaseKind::RequirementsExtraction) return kRequirementsSteps;
  return kGenerationSteps;
}

PhaseKind phase_of(StepKind step) {
  for (auto s : kRequirementsSteps) {
    if (s == step) return PhaseKind::RequirementsExtraction;
  }
  return PhaseKind::ApplicationGeneration;
}

std::string_view to_string(PhaseKind phase) {
  return phase == PhaseKind::RequirementsExtraction ? "RequirementsExtraction" : "ApplicationGeneration";
}

std::string_view to_string(StepKind step) {
  switch (step) {
    case StepKind::InteractionReq: return "InteractionReq";
    case StepKind::BusinessReq: return "BusinessReq";
    case StepKind::DataConfigReq: return "DataConfigReq";
    case StepKind::Consolidate: return "Consolidate";
    case StepKind::DataModelSql: return "DataModelSql";
    case StepKind::OrmObjects: return "OrmObjects";
    case StepKind::ApiCode: return "ApiCode";
    case StepKind::TestCases: return "TestCases";
    case StepKind::UiCode: return "UiCode";
  }
  return "InteractionReq";
}

std::optional<PhaseKind> parse_phase(std::string_view name) {
  if (name == "RequirementsExtraction" || name == "requirements") return PhaseKind::RequirementsExtraction;
  if (name == "ApplicationGeneration" || name == "generation") return PhaseKind::ApplicationGeneration;
  return std::nullopt;
}

std::optional<StepKind> parse_step(std::string_view name) {
  for (auto phase : {PhaseKind::RequirementsExtraction, PhaseKind::ApplicationGeneration}) {
    for (auto step : steps_of(phase)) {
      if (to_string(step) == name) return step;
    }
  }
  return std::nullopt;
}

}  // namespace modernkit
