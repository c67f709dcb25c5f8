#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace modernkit {

/// Every failure the engine can report. The enumerator names double as the
/// machine-readable codes exposed by the CLI and HTTP surfaces.
enum class ErrorCode {
  // scanning
  RootNotFound,
  NotADirectory,
  IoError,
  // prompts
  UnknownTemplate,
  MissingPlaceholder,
  EmptyContextValue,
  ContextTooLarge,
  InvalidTemplate,
  // gateway
  UnknownBackend,
  DuplicateBackend,
  InvalidEndpoint,
  Timeout,
  ExhaustedRetries,
  BackendError,
  IncompleteResponse,
  // pipeline
  MissingSource,
  SourceNotApproved,
  OutOfOrder,
  AlreadyGenerated,
  AlreadyApproved,
  GatewayFailure,
  StepNotGenerated,
  UnknownRun,
  UnknownStep,
  InvalidDecision,
  // store
  UnknownArtifact,
  UnknownVersion,
  InvalidTag,
  DanglingContextRef,
  InvalidArtifact,
  WorkspaceNotFound,
  // verifier
  SameBackend,
  StepHasNoArtifact,
  // general
  InvalidArgument,
  InvalidConfig,
  UsageError,
  NotFound,
};

/// Coarse grouping used to derive HTTP statuses and CLI exit codes.
enum class ErrorClass { NotFound, Precondition, Validation, Upstream, Internal };

std::string_view to_string(ErrorCode code);
ErrorClass error_class(ErrorCode code);
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nullptr)
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace modernkit
