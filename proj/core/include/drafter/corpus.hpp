#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "drafter/judge.hpp"
#include "drafter/lexical_metrics.hpp"
#include "drafter/types.hpp"

namespace drafter {

class Gateway;

struct CorpusRecord {
  std::string id;
  std::string category;
  std::string title;
  std::string description;
  /// Reference document, already de-identified.
  std::string text;
};

struct IngestError {
  std::size_t line = 0;
  std::string message;
};

struct IngestResult {
  std::vector<CorpusRecord> records;
  std::vector<IngestError> errors;
};

/// One JSON object per line with id, category, title, description, text.
/// Malformed lines are reported, not fatal. Throws Error(DuplicateId).
IngestResult parse_corpus(std::string_view jsonl);
/// Throws Error(Unreadable) or Error(DuplicateId).
IngestResult ingest(const std::string& path);

struct Split {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> test;
  /// Categories with a single record: it went to test, train lacks them.
  std::vector<std::string> singleton_categories;
};

/// One uniformly drawn record per category goes to test; the rest, in
/// input order, to train. Same seed, same split on every platform.
Split split_one_per_category(const std::vector<CorpusRecord>& records, std::uint64_t seed);

struct RecordOutcome {
  std::string record_id;
  std::optional<metrics::MetricReport> metrics;
  std::optional<double> judge_score;
  std::string judge_error;
  std::string error;
  std::size_t sections = 0;
  std::size_t model_calls = 0;
  std::size_t memory_queries = 0;
  /// Model calls whose context carried retrieved summaries.
  std::size_t retrieval_calls = 0;
  std::string draft_text;

  bool ok() const noexcept { return metrics.has_value(); }
};

struct Aggregate {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct ExperimentRun {
  std::string run_id;
  GenerationConfig config;
  /// Sorted by record id.
  std::vector<RecordOutcome> outcomes;
  std::size_t scored = 0;
  std::size_t failed = 0;
  Aggregate rouge_l_f1;
  Aggregate bleu;
  Aggregate meteor;
  /// Absent when no judge was configured.
  std::optional<Aggregate> geval;
};

struct ExperimentOptions {
  std::string run_prefix = "run";
  /// Judge gateway; nullptr leaves the judge columns absent.
  Gateway* judge = nullptr;
  JudgeOptions judge_options;
  /// Records processed concurrently.
  std::size_t parallel_records = 2;
};

/// For every config and record: plan (auto-approved) when the mode uses a
/// plan, generate, score against the record text and optionally judge.
/// Per-record failures are recorded and the run goes on. Seeds derive from
/// the run id and record id.
std::vector<ExperimentRun> run_experiment(const std::vector<CorpusRecord>& records,
                                          const std::vector<GenerationConfig>& configs, Gateway& gateway,
                                          const ExperimentOptions& options = {});

Aggregate aggregate(const std::vector<double>& values);

nlohmann::json experiment_report(const std::vector<ExperimentRun>& runs);
/// Columns: config, n, failed, RL, BLEU, METEOR, G-Eval.
std::string format_experiment_table(const std::vector<ExperimentRun>& runs);

}  // namespace drafter
