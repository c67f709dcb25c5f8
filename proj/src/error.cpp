#include "modernkit/error.hpp"

namespace modernkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RootNotFound: return "RootNotFound";
    case ErrorCode::NotADirectory: return "NotADirectory";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::EmptyContextValue: return "EmptyContextValue";
    case ErrorCode::ContextTooLarge: return "ContextTooLarge";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::UnknownBackend: return "UnknownBackend";
    case ErrorCode::DuplicateBackend: return "DuplicateBackend";
    case ErrorCode::InvalidEndpoint: return "InvalidEndpoint";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ExhaustedRetries: return "ExhaustedRetries";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::IncompleteResponse: return "IncompleteResponse";
    case ErrorCode::MissingSource: return "MissingSource";
    case ErrorCode::SourceNotApproved: return "SourceNotApproved";
    case ErrorCode::OutOfOrder: return "OutOfOrder";
    case ErrorCode::AlreadyGenerated: return "AlreadyGenerated";
    case ErrorCode::AlreadyApproved: return "AlreadyApproved";
    case ErrorCode::GatewayFailure: return "GatewayFailure";
    case ErrorCode::StepNotGenerated: return "StepNotGenerated";
    case ErrorCode::UnknownRun: return "UnknownRun";
    case ErrorCode::UnknownStep: return "UnknownStep";
    case ErrorCode::InvalidDecision: return "InvalidDecision";
    case ErrorCode::UnknownArtifact: return "UnknownArtifact";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::InvalidTag: return "InvalidTag";
    case ErrorCode::DanglingContextRef: return "DanglingContextRef";
    case ErrorCode::InvalidArtifact: return "InvalidArtifact";
    case ErrorCode::WorkspaceNotFound: return "WorkspaceNotFound";
    case ErrorCode::SameBackend: return "SameBackend";
    case ErrorCode::StepHasNoArtifact: return "StepHasNoArtifact";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

ErrorClass error_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::RootNotFound:
    case ErrorCode::UnknownTemplate:
    case ErrorCode::UnknownRun:
    case ErrorCode::UnknownStep:
    case ErrorCode::UnknownArtifact:
    case ErrorCode::UnknownVersion:
    case ErrorCode::WorkspaceNotFound:
    case ErrorCode::NotFound:
      return ErrorClass::NotFound;

    case ErrorCode::MissingSource:
    case ErrorCode::SourceNotApproved:
    case ErrorCode::OutOfOrder:
    case ErrorCode::AlreadyGenerated:
    case ErrorCode::AlreadyApproved:
    case ErrorCode::StepNotGenerated:
    case ErrorCode::StepHasNoArtifact:
    case ErrorCode::DuplicateBackend:
      return ErrorClass::Precondition;

    case ErrorCode::NotADirectory:
    case ErrorCode::MissingPlaceholder:
    case ErrorCode::EmptyContextValue:
    case ErrorCode::ContextTooLarge:
    case ErrorCode::InvalidTemplate:
    case ErrorCode::UnknownBackend:
    case ErrorCode::InvalidEndpoint:
    case ErrorCode::InvalidDecision:
    case ErrorCode::InvalidTag:
    case ErrorCode::DanglingContextRef:
    case ErrorCode::InvalidArtifact:
    case ErrorCode::SameBackend:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidConfig:
    case ErrorCode::UsageError:
      return ErrorClass::Validation;

    case ErrorCode::Timeout:
    case ErrorCode::ExhaustedRetries:
    case ErrorCode::BackendError:
    case ErrorCode::IncompleteResponse:
    case ErrorCode::GatewayFailure:
      return ErrorClass::Upstream;

    case ErrorCode::IoError:
      return ErrorClass::Internal;
  }
  return ErrorClass::Internal;
}

int http_status(ErrorCode code) {
  switch (error_class(code)) {
    case ErrorClass::NotFound: return 404;
    case ErrorClass::Precondition: return 409;
    case ErrorClass::Validation: return 400;
    case ErrorClass::Upstream: return 502;
    case ErrorClass::Internal: return 500;
  }
  return 500;
}

}  // namespace modernkit
