#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drafter/error.hpp"

namespace drafter {

class Gateway;

struct JudgeCase {
  std::string doc_des;
  std::string actual_document;
  std::string generated_document;
};

/// Throws Error(InvalidCase) when any field is empty or blank.
void validate_case(const JudgeCase& c);

/// The built-in "judge" template with the three inputs substituted.
std::string render_judge_prompt(const JudgeCase& c);

/// strict: the trimmed response must be one of "1".."10".
/// lenient: the first whitespace-delimited integer token is taken.
/// Throws Error(UnparseableScore) or Error(OutOfRange).
int parse_score(std::string_view response, bool lenient);

struct JudgeOptions {
  /// Calls per case; the case score is their mean.
  int samples = 1;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  int max_tokens = 16;
};

struct CaseResult {
  std::size_t index = 0;
  std::optional<double> score;
  std::vector<int> sample_scores;
  /// At least one sample needed the lenient parse.
  bool salvaged = false;
  std::optional<Errc> error;
  std::string error_message;

  bool ok() const noexcept { return score.has_value(); }
};

struct GevalReport {
  std::vector<CaseResult> cases;
  double mean = 0.0;
  std::size_t scored = 0;
  std::size_t failed = 0;
  std::size_t salvaged = 0;
};

/// Scores every case, concurrently up to the gateway's cap; results keep
/// input order. Per-case failures are recorded, never dropped. Throws
/// Error(AllCasesFailed) when nothing scored (including no cases).
GevalReport run_geval(const std::vector<JudgeCase>& cases, Gateway& gateway, const JudgeOptions& options = {});

}  // namespace drafter
