#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "drafter/gateway.hpp"
#include "drafter/judge.hpp"
#include "support/test_support.hpp"

namespace drafter {
namespace {

using testing::mock_gateway;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
  return s;
}

JudgeCase sample_case(std::string tag = "") {
  return {"Draft a lease" + tag, "The actual lease text" + tag, "The generated lease text" + tag};
}

TEST(JudgePrompt, MatchesGoldenTemplateByteForByte) {
  const auto golden = read_file(std::string(DRAFTER_TEST_DATA_DIR) + "/golden/judge_template.txt");
  ASSERT_FALSE(golden.empty());
  const auto rendered = render_judge_prompt({"\x01" "D", "\x01" "A", "\x01" "G"});
  auto unrendered = replace_all(rendered, "\x01" "D", "{{doc_des}}");
  unrendered = replace_all(unrendered, "\x01" "A", "{{Actual_Document}}");
  unrendered = replace_all(unrendered, "\x01" "G", "{{Generated_Document}}");
  while (!unrendered.empty() && unrendered.back() == '\n') unrendered.pop_back();
  EXPECT_EQ(unrendered, golden);
}

TEST(JudgePrompt, CarriesCriteriaAndOutputClause) {
  const auto p = render_judge_prompt(sample_case());
  EXPECT_NE(p.find("Factual Accuracy (50%)"), std::string::npos);
  EXPECT_NE(p.find("Completeness & Coverage (30%)"), std::string::npos);
  EXPECT_NE(p.find("Clarity & Coherence (20%)"), std::string::npos);
  EXPECT_NE(p.find("only a single integer score"), std::string::npos);
  EXPECT_EQ(p.find("{{"), std::string::npos);
  EXPECT_NE(p.find("The generated lease text"), std::string::npos);
}

TEST(JudgePrompt, BlankFieldsAreInvalid) {
  EXPECT_ERRC(render_judge_prompt({"", "a", "b"}), Errc::InvalidCase);
  EXPECT_ERRC(render_judge_prompt({"d", "  \n", "b"}), Errc::InvalidCase);
  EXPECT_ERRC(validate_case({"d", "a", ""}), Errc::InvalidCase);
}

TEST(ParseScore, Examples) {
  EXPECT_EQ(parse_score("7", false), 7);
  EXPECT_EQ(parse_score(" 10\n", false), 10);
  EXPECT_ERRC(parse_score("Score: 8", false), Errc::UnparseableScore);
  EXPECT_EQ(parse_score("Score: 8", true), 8);
  EXPECT_ERRC(parse_score("11", false), Errc::OutOfRange);
  EXPECT_ERRC(parse_score("0", false), Errc::OutOfRange);
  EXPECT_ERRC(parse_score("07", false), Errc::UnparseableScore);
  EXPECT_ERRC(parse_score("7.5", false), Errc::UnparseableScore);
  EXPECT_ERRC(parse_score("", true), Errc::UnparseableScore);
  EXPECT_ERRC(parse_score("I give it 12 points", true), Errc::OutOfRange);
  EXPECT_EQ(parse_score("I rate it 9 out of 10", true), 9);
}

// Exhaustive check of the strict language over a small alphabet.
TEST(ParseScore, StrictAcceptsExactlyOneToTenProperty) {
  const std::string alphabet = "0123456789 a-+\n";
  std::set<std::string> accepted;
  for (int i = 1; i <= 10; ++i) accepted.insert(std::to_string(i));
  std::vector<std::string> frontier{""};
  for (int len = 1; len <= 4; ++len) {
    std::vector<std::string> next;
    for (const auto& prefix : frontier) {
      for (char c : alphabet) next.push_back(prefix + c);
    }
    for (const auto& s : next) {
      std::string trimmed = s;
      while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '\n')) trimmed.erase(0, 1);
      while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\n')) trimmed.pop_back();
      const bool should_accept = accepted.count(trimmed) > 0;
      const auto code = DRAFTER_CAUGHT_ERRC(parse_score(s, false));
      ASSERT_EQ(!code.has_value(), should_accept) << "'" << s << "'";
      if (should_accept) ASSERT_EQ(parse_score(s, false), std::stoi(trimmed));
    }
    frontier = std::move(next);
  }
}

MockScript judge_says(std::string reply) {
  MockScript s;
  s.rules = {{"legal text evaluation", std::move(reply)}};
  return s;
}

TEST(Geval, ConstantJudge) {
  auto g = mock_gateway(judge_says("6"));
  const auto report = run_geval({sample_case("1"), sample_case("2"), sample_case("3"), sample_case("4")}, *g);
  EXPECT_DOUBLE_EQ(report.mean, 6.0);
  EXPECT_EQ(report.scored, 4u);
  EXPECT_EQ(report.failed, 0u);
  EXPECT_EQ(g->stats().calls, 4u);
}

TEST(Geval, ProseCaseIsRecordedNotDropped) {
  MockScript s;
  s.rules = {{"text3", "This document is quite good overall."}, {"legal text evaluation", "8"}};
  auto g = mock_gateway(s);
  const auto report = run_geval({sample_case("1"), sample_case("2"), sample_case("3"), sample_case("4")}, *g);
  ASSERT_EQ(report.cases.size(), 4u);
  EXPECT_EQ(report.scored, 3u);
  EXPECT_EQ(report.failed, 1u);
  EXPECT_FALSE(report.cases[2].ok());
  EXPECT_EQ(report.cases[2].error, Errc::UnparseableScore);
  EXPECT_DOUBLE_EQ(report.mean, 8.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(report.cases[i].index, i);
}

TEST(Geval, LenientFallbackMarksSalvaged) {
  auto g = mock_gateway(judge_says("Score: 9"));
  const auto report = run_geval({sample_case()}, *g);
  EXPECT_DOUBLE_EQ(report.mean, 9.0);
  EXPECT_EQ(report.salvaged, 1u);
  EXPECT_TRUE(report.cases[0].salvaged);
  EXPECT_EQ(g->stats().calls, 1u);
}

TEST(Geval, EmptyAndAllFailed) {
  auto g = mock_gateway(judge_says("no idea"));
  EXPECT_ERRC(run_geval({}, *g), Errc::AllCasesFailed);
  EXPECT_ERRC(run_geval({sample_case()}, *g), Errc::AllCasesFailed);
}

TEST(Geval, InvalidCaseRecordedPerCase) {
  auto g = mock_gateway(judge_says("5"));
  const auto report = run_geval({sample_case(), {"", "a", "b"}}, *g);
  EXPECT_EQ(report.scored, 1u);
  EXPECT_EQ(report.cases[1].error, Errc::InvalidCase);
}

TEST(Geval, SamplesAverageWithDistinctSeeds) {
  MockScript s;
  s.rules = {{"legal text evaluation", "{{seed}}"}};
  auto g = mock_gateway(s);
  JudgeOptions options;
  options.samples = 3;
  options.seed = 4;
  const auto report = run_geval({sample_case()}, *g, options);
  EXPECT_EQ(report.cases[0].sample_scores, (std::vector<int>{4, 5, 6}));
  EXPECT_DOUBLE_EQ(report.mean, 5.0);
}

TEST(Geval, MeanWithinScaleAndOrderKeptProperty) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    MockScript s;
    std::vector<JudgeCase> cases;
    std::vector<std::optional<int>> expected;
    const auto n = 1 + rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string marker = "case-" + std::to_string(trial) + "-" + std::to_string(i) + "-end";
      cases.push_back({"desc", "actual", marker});
      if (rng() % 4 == 0) {
        s.rules.push_back({marker, "unsure"});
        expected.push_back(std::nullopt);
      } else {
        const int v = 1 + static_cast<int>(rng() % 10);
        s.rules.push_back({marker, std::to_string(v)});
        expected.push_back(v);
      }
    }
    auto g = mock_gateway(s, 3);
    const bool any = std::any_of(expected.begin(), expected.end(), [](const auto& v) { return v.has_value(); });
    if (!any) {
      EXPECT_ERRC(run_geval(cases, *g), Errc::AllCasesFailed);
      continue;
    }
    const auto report = run_geval(cases, *g);
    EXPECT_GE(report.mean, 1.0);
    EXPECT_LE(report.mean, 10.0);
    EXPECT_LE(g->peak_in_flight(), 3u);
    for (std::size_t i = 0; i < n; ++i) {
      if (expected[i]) {
        EXPECT_EQ(report.cases[i].score, static_cast<double>(*expected[i]));
      } else {
        EXPECT_FALSE(report.cases[i].ok());
      }
    }
  }
}

}  // namespace
}  // namespace drafter
