#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace modernkit {

enum class PhaseKind { RequirementsExtraction, ApplicationGeneration };

/// Pipeline steps. Requirements extraction walks the legacy layers from the
/// interaction layer down; application generation walks them back up, data
/// layer first.
enum class StepKind {
  InteractionReq,
  BusinessReq,
  DataConfigReq,
  Consolidate,
  DataModelSql,
  OrmObjects,
  ApiCode,
  TestCases,
  UiCode,
};

inline constexpr StepKind kRequirementsSteps[] = {StepKind::InteractionReq, StepKind::BusinessReq,
                                                  StepKind::DataConfigReq, StepKind::Consolidate};
inline constexpr StepKind kGenerationSteps[] = {StepKind::DataModelSql, StepKind::OrmObjects, StepKind::ApiCode,
                                                StepKind::TestCases, StepKind::UiCode};

std::span<const StepKind> steps_of(PhaseKind phase);
PhaseKind phase_of(StepKind step);

std::string_view to_string(PhaseKind phase);
std::string_view to_string(StepKind step);
std::optional<PhaseKind> parse_phase(std::string_view name);
std::optional<StepKind> parse_step(std::string_view name);

}  // namespace modernkit
