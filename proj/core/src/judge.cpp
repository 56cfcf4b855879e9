#include "drafter/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

#include "drafter/gateway.hpp"
#include "drafter/text.hpp"

namespace drafter {

namespace {

bool blank(std::string_view s) { return text::trim(s).empty(); }

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Digits-only token to a 1..10 score.
int checked_score(std::string_view digits, std::string_view response) {
  const auto significant = digits.find_first_not_of('0');
  const bool in_range = significant != std::string_view::npos && digits.size() - significant <= 2 &&
                        std::stoi(std::string(digits.substr(significant))) <= 10;
  if (!in_range) throw Error(Errc::OutOfRange, "score '" + std::string(response) + "' outside 1..10");
  return std::stoi(std::string(digits.substr(significant)));
}

}  // namespace

void validate_case(const JudgeCase& c) {
  if (blank(c.doc_des)) throw Error(Errc::InvalidCase, "doc_des is empty");
  if (blank(c.actual_document)) throw Error(Errc::InvalidCase, "actual document is empty");
  if (blank(c.generated_document)) throw Error(Errc::InvalidCase, "generated document is empty");
}

std::string render_judge_prompt(const JudgeCase& c) {
  validate_case(c);
  return render_template("judge", {{"doc_des", c.doc_des},
                                   {"Actual_Document", c.actual_document},
                                   {"Generated_Document", c.generated_document}});
}

int parse_score(std::string_view response, bool lenient) {
  const auto trimmed = text::trim(response);
  if (!lenient) {
    if (!all_digits(trimmed)) throw Error(Errc::UnparseableScore, "expected a bare integer, got '" + trimmed + "'");
    // "07" is not in the accepted language even though its value is.
    if (trimmed.size() > 1 && trimmed.front() == '0') {
      if (trimmed.find_first_not_of('0') == std::string::npos) checked_score(trimmed, trimmed);
      throw Error(Errc::UnparseableScore, "leading zero in '" + trimmed + "'");
    }
    return checked_score(trimmed, trimmed);
  }
  for (const auto& token : text::split_whitespace(trimmed)) {
    if (all_digits(token)) return checked_score(token, token);
  }
  throw Error(Errc::UnparseableScore, "no integer token in response");
}

GevalReport run_geval(const std::vector<JudgeCase>& cases, Gateway& gateway, const JudgeOptions& options) {
  if (cases.empty()) throw Error(Errc::AllCasesFailed, "no cases to score");
  const int samples = std::max(1, options.samples);

  GevalReport report;
  report.cases.resize(cases.size());

  auto score_one = [&](std::size_t i) {
    auto& out = report.cases[i];
    out.index = i;
    try {
      auto request = make_user_request(render_judge_prompt(cases[i]), "judge");
      request.temperature = options.temperature;
      request.max_tokens = options.max_tokens;
      double sum = 0.0;
      for (int s = 0; s < samples; ++s) {
        request.seed = options.seed + static_cast<std::uint64_t>(s);
        const auto reply = gateway.complete(request).text;
        int value;
        try {
          value = parse_score(reply, false);
        } catch (const Error&) {
          value = parse_score(reply, true);
          out.salvaged = true;
        }
        out.sample_scores.push_back(value);
        sum += value;
      }
      out.score = sum / samples;
    } catch (const Error& e) {
      out.error = e.code();
      out.error_message = e.what();
      out.sample_scores.clear();
      out.salvaged = false;
    }
  };

  const auto workers = std::min<std::size_t>(std::max<std::size_t>(1, gateway.max_concurrency()), cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) score_one(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  double sum = 0.0;
  for (const auto& c : report.cases) {
    if (c.ok()) {
      ++report.scored;
      sum += *c.score;
      if (c.salvaged) ++report.salvaged;
    } else {
      ++report.failed;
    }
  }
  if (report.scored == 0) throw Error(Errc::AllCasesFailed, "none of " + std::to_string(cases.size()) + " cases scored");
  report.mean = sum / static_cast<double>(report.scored);
  return report;
}

}  // namespace drafter
