#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drafter {

inline constexpr std::size_t kMaxTitleLength = 200;
inline constexpr std::size_t kMaxPlanTitles = 64;

/// What the user asks for: a title, an instruction-style description and a
/// free-form category label.
struct DocumentSpec {
  std::string id;
  std::string title;
  std::string description;
  std::string category;
};

enum class SpecViolation { EmptyTitle, EmptyDescription, TitleTooLong };

std::string_view to_string(SpecViolation v) noexcept;

struct ValidationResult {
  std::vector<SpecViolation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

ValidationResult validate_spec(const DocumentSpec& spec);

struct SectionTitle {
  std::size_t index = 0;
  std::string text;

  friend bool operator==(const SectionTitle&, const SectionTitle&) = default;
};

struct SectionPlan {
  std::vector<SectionTitle> titles;
  std::uint64_t revision = 0;
  bool approved = false;

  std::size_t size() const noexcept { return titles.size(); }
  std::vector<std::string> texts() const;

  friend bool operator==(const SectionPlan&, const SectionPlan&) = default;
};

/// Builds a plan with contiguous indices; validates title text and uniqueness.
SectionPlan make_plan(const std::vector<std::string>& titles, std::uint64_t revision = 0);

/// Trim plus ASCII/Unicode-agnostic case fold used for duplicate detection.
std::string title_key(std::string_view title);

struct SectionRecord {
  std::size_t index = 0;
  std::string title;
  std::string content;
  std::string summary;
  std::size_t token_estimate = 0;

  friend bool operator==(const SectionRecord&, const SectionRecord&) = default;
};

enum class GenerationMode { FullWrapper, LongPromptOnly, RetrievalOnly, StructureOnly };

std::string_view to_string(GenerationMode mode) noexcept;
/// Accepts canonical names and the CLI short forms full|long|retrieval|structure.
std::optional<GenerationMode> parse_mode(std::string_view text) noexcept;

struct GenerationConfig {
  GenerationMode mode = GenerationMode::FullWrapper;
  std::size_t top_k = 3;
  std::size_t context_token_budget = 4500;
  bool llm_polish = false;
  std::uint64_t seed = 0;
  double temperature = 0.0;
  int max_tokens = 2048;
  std::size_t retrieval_chunks = 4;
  std::size_t summary_max_words = 120;

  bool retrieval_enabled() const noexcept {
    return mode == GenerationMode::FullWrapper || mode == GenerationMode::RetrievalOnly;
  }

  friend bool operator==(const GenerationConfig&, const GenerationConfig&) = default;
};

struct DraftDocument {
  std::string spec_id;
  std::vector<SectionRecord> sections;
  std::string assembled_text;
  GenerationConfig config;
  /// Per section, the ids of memory entries that were placed in its context.
  std::vector<std::vector<std::string>> provenance;

  friend bool operator==(const DraftDocument&, const DraftDocument&) = default;
};

/// Job lifecycle. `section_index`/`section_count` are meaningful only for
/// Generating; `reason` only for Failed.
struct JobState {
  enum class Kind { PlanPending, AwaitingApproval, Generating, Refining, Complete, Failed };

  Kind kind = Kind::PlanPending;
  std::size_t section_index = 0;
  std::size_t section_count = 0;
  std::string reason;

  static JobState plan_pending() { return {}; }
  static JobState awaiting_approval() { return {Kind::AwaitingApproval, 0, 0, {}}; }
  static JobState generating(std::size_t i, std::size_t n) { return {Kind::Generating, i, n, {}}; }
  static JobState refining() { return {Kind::Refining, 0, 0, {}}; }
  static JobState complete() { return {Kind::Complete, 0, 0, {}}; }
  static JobState failed(std::string why) { return {Kind::Failed, 0, 0, std::move(why)}; }

  bool terminal() const noexcept { return kind == Kind::Complete || kind == Kind::Failed; }

  friend bool operator==(const JobState&, const JobState&) = default;
};

std::string_view to_string(JobState::Kind kind) noexcept;
std::optional<JobState::Kind> parse_state_kind(std::string_view text) noexcept;

/// The job transition relation:
///   PlanPending -> AwaitingApproval -> Generating(0) -> ... -> Generating(n-1)
///   -> Refining -> Complete, AwaitingApproval -> AwaitingApproval (plan edits),
///   and any state -> Failed.
bool is_legal_transition(const JobState& from, const JobState& to) noexcept;

/// Whitespace-token count. Budgets built on it are approximate by construction.
std::size_t estimate_tokens(std::string_view text) noexcept;

std::string trim(std::string_view text);

}  // namespace drafter
