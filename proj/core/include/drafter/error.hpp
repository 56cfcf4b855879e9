#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drafter {

/// Every failure the library reports by exception carries one of these codes.
/// The CLI maps them onto exit codes and the HTTP layer onto status codes.
enum class Errc {
  // core-model / planner
  InvalidSpec,
  PlanningFailed,
  OutOfBounds,
  DuplicateTitle,
  InvalidTitle,
  PlanTooLarge,
  PlanLocked,
  EmptyPlan,
  AlreadyApproved,
  IllegalTransition,
  // llm-gateway
  InvalidRequest,
  Timeout,
  ProviderError,
  ExhaustedRetries,
  MissingBinding,
  UnknownTemplate,
  InvalidConfig,
  // memory-index
  EmptyText,
  DimensionMismatch,
  CorruptRecord,
  // section-engine
  GenerationFailed,
  SectionFailed,
  // deid
  SpanOutOfRange,
  DetectorUnavailable,
  // lexical-metrics
  EmptyReferences,
  // judge
  UnparseableScore,
  OutOfRange,
  AllCasesFailed,
  InvalidCase,
  // agreement
  MissingCells,
  ZeroVarianceRater,
  NoPairableValues,
  InvalidMatrix,
  // corpus-harness
  Unreadable,
  DuplicateId,
  MalformedRecord,
  // service-api
  NotFound,
  RevisionMismatch,
  WrongState,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace drafter
