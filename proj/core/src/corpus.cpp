#include "drafter/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "drafter/error.hpp"
#include "drafter/gateway.hpp"
#include "drafter/json_io.hpp"
#include "drafter/memory_index.hpp"
#include "drafter/planner.hpp"
#include "drafter/section_engine.hpp"
#include "drafter/text.hpp"

namespace drafter {

IngestResult parse_corpus(std::string_view jsonl) {
  IngestResult out;
  std::set<std::string> ids;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    CorpusRecord rec;
    try {
      const auto j = json::parse(line);
      rec.id = require_string(j, "id");
      rec.category = require_string(j, "category");
      rec.title = require_string(j, "title");
      rec.description = require_string(j, "description");
      rec.text = require_string(j, "text");
      if (text::trim(rec.id).empty()) throw Error(Errc::InvalidRequest, "empty id");
      if (text::trim(rec.category).empty()) throw Error(Errc::InvalidRequest, "empty category");
    } catch (const json::exception& e) {
      out.errors.push_back({line_no, std::string("not a JSON object: ") + e.what()});
      continue;
    } catch (const Error& e) {
      out.errors.push_back({line_no, e.what()});
      continue;
    }
    if (!ids.insert(rec.id).second) {
      throw Error(Errc::DuplicateId, "record id '" + rec.id + "' repeated on line " + std::to_string(line_no));
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

IngestResult ingest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Unreadable, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(Errc::Unreadable, "read error on " + path);
  return parse_corpus(buf.str());
}

namespace {

// splitmix64: small, well-known and identical on every platform, unlike
// the standard distributions.
std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t uniform_below(std::uint64_t& state, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = splitmix(state);
  } while (x >= limit);
  return x % n;
}

}  // namespace

Split split_one_per_category(const std::vector<CorpusRecord>& records, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < records.size(); ++i) by_category[records[i].category].push_back(i);

  std::uint64_t state = seed;
  std::vector<bool> in_test(records.size(), false);
  Split split;
  for (const auto& [category, members] : by_category) {
    in_test[members[uniform_below(state, members.size())]] = true;
    if (members.size() == 1) split.singleton_categories.push_back(category);
  }
  for (std::size_t i = 0; i < records.size(); ++i) (in_test[i] ? split.test : split.train).push_back(records[i]);
  return split;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  a.count = values.size();
  a.min = *std::min_element(values.begin(), values.end());
  a.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  return a;
}

namespace {

bool uses_plan(GenerationMode mode) {
  return mode == GenerationMode::FullWrapper || mode == GenerationMode::StructureOnly;
}

RecordOutcome run_record(const CorpusRecord& rec, GenerationConfig config, const std::string& run_id, Gateway& gateway,
                         MemoryIndex& memory, EmbeddingProvider& embedder, const ExperimentOptions& options) {
  RecordOutcome out;
  out.record_id = rec.id;
  const std::string job_id = run_id + "/" + rec.id;
  config.seed = text::fnv1a64(job_id, config.seed);
  try {
    const DocumentSpec spec{rec.id, rec.title, rec.description, rec.category};
    SectionPlan plan;
    if (uses_plan(config.mode)) {
      plan = approve_plan(generate_plan(spec, gateway, config));
    } else {
      plan.approved = true;
    }
    GenerationTrace trace;
    PipelineHooks hooks;
    hooks.trace = &trace;
    const MemoryHandle handle{memory, embedder, job_id};
    const auto draft = run_pipeline(spec, plan, gateway, handle, config, hooks);
    memory.remove_job(job_id);

    out.sections = draft.sections.size();
    out.model_calls = trace.calls.size();
    out.memory_queries = trace.memory_queries;
    out.retrieval_calls = static_cast<std::size_t>(std::count_if(
        trace.calls.begin(), trace.calls.end(), [](const TraceCall& c) { return !c.retrieved_ids.empty(); }));
    out.draft_text = draft.assembled_text;
    out.metrics = metrics::score_pair(draft.assembled_text, rec.text);
  } catch (const Error& e) {
    memory.remove_job(job_id);
    out.error = e.what();
    return out;
  }

  if (options.judge) {
    try {
      auto judge_options = options.judge_options;
      judge_options.seed = config.seed;
      const auto report =
          run_geval({JudgeCase{rec.description, rec.text, out.draft_text}}, *options.judge, judge_options);
      const auto& c = report.cases.front();
      out.judge_score = c.score;
    } catch (const Error& e) {
      out.judge_error = e.what();
    }
  }
  return out;
}

std::string run_id_for(const ExperimentOptions& options, std::size_t index, const GenerationConfig& config) {
  return options.run_prefix + "-" + std::to_string(index + 1) + "-" + std::string(to_string(config.mode));
}

}  // namespace

std::vector<ExperimentRun> run_experiment(const std::vector<CorpusRecord>& records,
                                          const std::vector<GenerationConfig>& configs, Gateway& gateway,
                                          const ExperimentOptions& options) {
  std::vector<ExperimentRun> runs;
  MemoryIndex memory;
  HashEmbedding embedder;

  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    ExperimentRun run;
    run.config = configs[ci];
    run.run_id = run_id_for(options, ci, configs[ci]);
    run.outcomes.resize(records.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < records.size(); i = next++) {
        run.outcomes[i] = run_record(records[i], configs[ci], run.run_id, gateway, memory, embedder, options);
      }
    };
    const auto workers = std::min(std::max<std::size_t>(1, options.parallel_records), records.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    if (!records.empty()) worker();
    for (auto& t : pool) t.join();

    std::sort(run.outcomes.begin(), run.outcomes.end(),
              [](const RecordOutcome& a, const RecordOutcome& b) { return a.record_id < b.record_id; });
    std::vector<double> rl, bl, mt, ge;
    for (const auto& o : run.outcomes) {
      if (!o.ok()) {
        ++run.failed;
        continue;
      }
      ++run.scored;
      rl.push_back(o.metrics->rouge_l.f1);
      bl.push_back(o.metrics->bleu);
      mt.push_back(o.metrics->meteor);
      if (o.judge_score) ge.push_back(*o.judge_score);
    }
    run.rouge_l_f1 = aggregate(rl);
    run.bleu = aggregate(bl);
    run.meteor = aggregate(mt);
    if (options.judge) run.geval = aggregate(ge);
    runs.push_back(std::move(run));
  }
  return runs;
}

namespace {

json aggregate_json(const Aggregate& a) {
  return {{"count", a.count}, {"mean", a.mean}, {"min", a.min}, {"max", a.max}};
}

std::string fmt(double v, int precision = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

json experiment_report(const std::vector<ExperimentRun>& runs) {
  json out = json::object();
  out["metric_variants"] = {{"rouge_l", "lcs_f1_beta1"},
                            {"bleu", "sentence_bleu4_reciprocal_count_smoothing"},
                            {"meteor", "exact_stem_alpha0.9_beta3_gamma0.5"}};
  out["runs"] = json::array();
  for (const auto& r : runs) {
    json run = {{"run_id", r.run_id}, {"config", r.config}, {"scored", r.scored}, {"failed", r.failed}};
    run["aggregates"] = {{"rouge_l_f1", aggregate_json(r.rouge_l_f1)},
                         {"bleu", aggregate_json(r.bleu)},
                         {"meteor", aggregate_json(r.meteor)},
                         {"geval", r.geval ? aggregate_json(*r.geval) : json("absent")}};
    run["records"] = json::array();
    for (const auto& o : r.outcomes) {
      json rec = {{"record_id", o.record_id},
                  {"sections", o.sections},
                  {"model_calls", o.model_calls},
                  {"memory_queries", o.memory_queries},
                  {"retrieval_calls", o.retrieval_calls}};
      rec["metrics"] = o.metrics ? json(*o.metrics) : json(nullptr);
      if (!r.geval) {
        rec["judge_score"] = "absent";
      } else {
        rec["judge_score"] = o.judge_score ? json(*o.judge_score) : json(nullptr);
        if (!o.judge_error.empty()) rec["judge_error"] = o.judge_error;
      }
      if (!o.error.empty()) rec["error"] = o.error;
      run["records"].push_back(std::move(rec));
    }
    out["runs"].push_back(std::move(run));
  }
  return out;
}

std::string format_experiment_table(const std::vector<ExperimentRun>& runs) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"config", "n", "failed", "RL", "BLEU", "METEOR", "G-Eval"});
  for (const auto& r : runs) {
    std::string geval = "absent";
    if (r.geval) geval = r.geval->count ? fmt(r.geval->mean, 2) : "n/a";
    rows.push_back({std::string(to_string(r.config.mode)), std::to_string(r.scored), std::to_string(r.failed),
                    fmt(r.rouge_l_f1.mean), fmt(r.bleu.mean), fmt(r.meteor.mean), geval});
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += "  ";
      // First column left-aligned, numbers right-aligned.
      if (c == 0) {
        line += row[c] + std::string(width[c] - row[c].size(), ' ');
      } else {
        line += std::string(width[c] - row[c].size(), ' ') + row[c];
      }
    }
    out += text::rtrim(line) + "\n";
  }
  return out;
}

}  // namespace drafter
