#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "drafter/gateway.hpp"
#include "drafter/types.hpp"

namespace drafter {

namespace edit {
struct Rename {
  std::size_t index = 0;
  std::string text;
};
struct Insert {
  std::size_t index = 0;  // == size() appends
  std::string text;
};
struct Remove {
  std::size_t index = 0;
};
struct Move {
  std::size_t from = 0;
  std::size_t to = 0;
};
}  // namespace edit

using PlanEdit = std::variant<edit::Rename, edit::Insert, edit::Remove, edit::Move>;

/// Extracts section titles from a model's list output. Recognized lines
/// start with "N.", "N)", "-", "*" or one or more "#" followed by a space.
/// Markers and surrounding emphasis are stripped; duplicates (case-folded)
/// keep their first occurrence; at most 64 titles are returned.
std::vector<std::string> parse_titles(std::string_view raw);

/// "1. A\n2. B" rendering; parse_titles(render_numbered(t)) == t for any
/// output of parse_titles.
std::string render_numbered(const std::vector<std::string>& titles);

/// Phase one: ask the model for section titles. Retries once with a stricter
/// prompt if nothing parses; throws Error(PlanningFailed) after that.
SectionPlan generate_plan(const DocumentSpec& spec, Gateway& gateway, const GenerationConfig& config);

/// Returns a new plan with `e` applied and revision + 1.
/// Errors: PlanLocked, OutOfBounds, DuplicateTitle, InvalidTitle, PlanTooLarge.
SectionPlan apply_edit(const SectionPlan& plan, const PlanEdit& e);

/// Errors: EmptyPlan, AlreadyApproved.
SectionPlan approve_plan(const SectionPlan& plan);

}  // namespace drafter
