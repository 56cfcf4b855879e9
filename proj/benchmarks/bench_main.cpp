#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "drafter/deid.hpp"
#include "drafter/lexical_metrics.hpp"
#include "drafter/memory_index.hpp"

namespace {

using namespace drafter;

void BM_MemoryQuery(benchmark::State& state) {
  MemoryIndex index;
  HashEmbedding embedder;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto summary = "summary " + std::to_string(i) + " about clause " + std::to_string(i % 53);
    index.upsert({"job", i, "T", summary, embed(summary, embedder)});
  }
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.query("job", "obligations under clause " + std::to_string(q++ % 53), 3, embedder));
  }
}
BENCHMARK(BM_MemoryQuery)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

std::string random_text(std::mt19937& rng, std::size_t words) {
  static const char* vocab[] = {"the", "tenant", "shall", "pay", "rent", "monthly", "to", "landlord", "and",
                                "maintain", "premises", "in", "good", "repair", "lease", "terms"};
  std::string out;
  for (std::size_t i = 0; i < words; ++i) out += std::string(vocab[rng() % 16]) + " ";
  return out;
}

void BM_ScorePair(benchmark::State& state) {
  std::mt19937 rng(7);
  const auto words = static_cast<std::size_t>(state.range(0));
  const auto cand = random_text(rng, words);
  const auto ref = random_text(rng, words);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::score_pair(cand, ref));
}
BENCHMARK(BM_ScorePair)->Arg(50)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_Redact(benchmark::State& state) {
  std::mt19937 rng(9);
  std::string text = random_text(rng, static_cast<std::size_t>(state.range(0)));
  std::vector<deid::EntitySpan> spans;
  for (std::size_t pos = 0; pos + 12 < text.size(); pos += 40) spans.push_back({pos, pos + 9, "PERSON"});
  for (auto _ : state) benchmark::DoNotOptimize(deid::redact(text, spans));
}
BENCHMARK(BM_Redact)->Arg(1000)->Arg(20000);

void BM_RuleDetector(benchmark::State& state) {
  deid::RuleDetector rules;
  const std::string text =
      "I Ramesh Kumar of Lucknow send Greetings. Mr. Suresh Kumar signed on 12/05/2021 and wrote to "
      "ravi.k@example.co.in or +91 98765 43210. ";
  for (auto _ : state) benchmark::DoNotOptimize(rules.detect(text));
}
BENCHMARK(BM_RuleDetector);

}  // namespace
BENCHMARK_MAIN();
