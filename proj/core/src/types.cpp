#include "drafter/types.hpp"

#include <unordered_set>

#include "drafter/error.hpp"
#include "drafter/text.hpp"

namespace drafter {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::PlanningFailed: return "PlanningFailed";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::DuplicateTitle: return "DuplicateTitle";
    case Errc::InvalidTitle: return "InvalidTitle";
    case Errc::PlanTooLarge: return "PlanTooLarge";
    case Errc::PlanLocked: return "PlanLocked";
    case Errc::EmptyPlan: return "EmptyPlan";
    case Errc::AlreadyApproved: return "AlreadyApproved";
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::InvalidRequest: return "InvalidRequest";
    case Errc::Timeout: return "Timeout";
    case Errc::ProviderError: return "ProviderError";
    case Errc::ExhaustedRetries: return "ExhaustedRetries";
    case Errc::MissingBinding: return "MissingBinding";
    case Errc::UnknownTemplate: return "UnknownTemplate";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptyText: return "EmptyText";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::CorruptRecord: return "CorruptRecord";
    case Errc::GenerationFailed: return "GenerationFailed";
    case Errc::SectionFailed: return "SectionFailed";
    case Errc::SpanOutOfRange: return "SpanOutOfRange";
    case Errc::DetectorUnavailable: return "DetectorUnavailable";
    case Errc::EmptyReferences: return "EmptyReferences";
    case Errc::UnparseableScore: return "UnparseableScore";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::AllCasesFailed: return "AllCasesFailed";
    case Errc::InvalidCase: return "InvalidCase";
    case Errc::MissingCells: return "MissingCells";
    case Errc::ZeroVarianceRater: return "ZeroVarianceRater";
    case Errc::NoPairableValues: return "NoPairableValues";
    case Errc::InvalidMatrix: return "InvalidMatrix";
    case Errc::Unreadable: return "Unreadable";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::NotFound: return "NotFound";
    case Errc::RevisionMismatch: return "RevisionMismatch";
    case Errc::WrongState: return "WrongState";
  }
  return "Unknown";
}

std::string_view to_string(SpecViolation v) noexcept {
  switch (v) {
    case SpecViolation::EmptyTitle: return "empty title";
    case SpecViolation::EmptyDescription: return "empty description";
    case SpecViolation::TitleTooLong: return "title longer than 200 characters";
  }
  return "unknown";
}

std::string trim(std::string_view text) { return text::trim(text); }

ValidationResult validate_spec(const DocumentSpec& spec) {
  ValidationResult result;
  const auto title = trim(spec.title);
  if (title.empty()) {
    result.violations.push_back(SpecViolation::EmptyTitle);
  } else if (text::decode_utf8(title).size() > kMaxTitleLength) {
    result.violations.push_back(SpecViolation::TitleTooLong);
  }
  if (trim(spec.description).empty()) result.violations.push_back(SpecViolation::EmptyDescription);
  return result;
}

std::vector<std::string> SectionPlan::texts() const {
  std::vector<std::string> out;
  out.reserve(titles.size());
  for (const auto& t : titles) out.push_back(t.text);
  return out;
}

std::string title_key(std::string_view title) { return text::to_lower_utf8(trim(title)); }

SectionPlan make_plan(const std::vector<std::string>& titles, std::uint64_t revision) {
  if (titles.size() > kMaxPlanTitles) {
    throw Error(Errc::PlanTooLarge, std::to_string(titles.size()) + " titles exceed the cap of 64");
  }
  SectionPlan plan;
  plan.revision = revision;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    auto t = trim(titles[i]);
    if (t.empty()) throw Error(Errc::InvalidTitle, "title at index " + std::to_string(i) + " is empty");
    if (text::decode_utf8(t).size() > kMaxTitleLength) {
      throw Error(Errc::InvalidTitle, "title at index " + std::to_string(i) + " exceeds 200 characters");
    }
    if (!seen.insert(title_key(t)).second) throw Error(Errc::DuplicateTitle, "duplicate title '" + t + "'");
    plan.titles.push_back({i, std::move(t)});
  }
  return plan;
}

std::string_view to_string(GenerationMode mode) noexcept {
  switch (mode) {
    case GenerationMode::FullWrapper: return "FullWrapper";
    case GenerationMode::LongPromptOnly: return "LongPromptOnly";
    case GenerationMode::RetrievalOnly: return "RetrievalOnly";
    case GenerationMode::StructureOnly: return "StructureOnly";
  }
  return "FullWrapper";
}

std::optional<GenerationMode> parse_mode(std::string_view t) noexcept {
  if (t == "FullWrapper" || t == "full") return GenerationMode::FullWrapper;
  if (t == "LongPromptOnly" || t == "long") return GenerationMode::LongPromptOnly;
  if (t == "RetrievalOnly" || t == "retrieval") return GenerationMode::RetrievalOnly;
  if (t == "StructureOnly" || t == "structure") return GenerationMode::StructureOnly;
  return std::nullopt;
}

std::string_view to_string(JobState::Kind kind) noexcept {
  using K = JobState::Kind;
  switch (kind) {
    case K::PlanPending: return "PlanPending";
    case K::AwaitingApproval: return "AwaitingApproval";
    case K::Generating: return "Generating";
    case K::Refining: return "Refining";
    case K::Complete: return "Complete";
    case K::Failed: return "Failed";
  }
  return "PlanPending";
}

std::optional<JobState::Kind> parse_state_kind(std::string_view t) noexcept {
  using K = JobState::Kind;
  for (K k : {K::PlanPending, K::AwaitingApproval, K::Generating, K::Refining, K::Complete, K::Failed}) {
    if (to_string(k) == t) return k;
  }
  return std::nullopt;
}

bool is_legal_transition(const JobState& from, const JobState& to) noexcept {
  using K = JobState::Kind;
  if (to.kind == K::Failed) return true;
  switch (from.kind) {
    case K::PlanPending:
      return to.kind == K::AwaitingApproval;
    case K::AwaitingApproval:
      if (to.kind == K::AwaitingApproval) return true;
      return to.kind == K::Generating && to.section_index == 0 && to.section_count >= 1;
    case K::Generating:
      if (to.kind == K::Generating) {
        return to.section_count == from.section_count && to.section_index == from.section_index + 1 &&
               to.section_index < to.section_count;
      }
      return to.kind == K::Refining && from.section_index + 1 == from.section_count;
    case K::Refining:
      return to.kind == K::Complete;
    case K::Complete:
    case K::Failed:
      return false;
  }
  return false;
}

std::size_t estimate_tokens(std::string_view s) noexcept {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : s) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    if (space) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

}  // namespace drafter
