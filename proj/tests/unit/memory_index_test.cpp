#include <gtest/gtest.h>

#include <cmath>
#include <atomic>
#include <bit>
#include <filesystem>
#include <limits>
#include <fstream>
#include <random>
#include <thread>

#include "drafter/memory_index.hpp"
#include "oracles/oracles.hpp"
#include "support/test_support.hpp"

namespace drafter {
namespace {

std::vector<float> random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(d);
  for (auto& x : v) x = n(rng);
  normalize_in_place(v);
  return v;
}

MemoryEntry entry(std::string job, std::size_t index, std::vector<float> emb, std::string summary = "s") {
  return {std::move(job), index, "T" + std::to_string(index), std::move(summary), std::move(emb)};
}

class FixedProvider final : public EmbeddingProvider {
 public:
  explicit FixedProvider(std::vector<float> v) : v_(std::move(v)) {}
  std::vector<float> raw_embedding(std::string_view) override { return v_; }
  std::size_t dimension() const override { return v_.size(); }
  std::string id() const override { return "fixed"; }

 private:
  std::vector<float> v_;
};

double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

TEST(Embed, HashProviderIsDeterministicAndUnit) {
  HashEmbedding h;
  const auto a = embed("Indemnification obligations of the parties", h);
  const auto b = embed("Indemnification obligations of the parties", h);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 256u);
  EXPECT_NEAR(norm(a), 1.0, 1e-6);
  EXPECT_NE(a, embed("Something else entirely", h));
  HashEmbedding other_seed(256, 7);
  EXPECT_NE(a, embed("Indemnification obligations of the parties", other_seed));
}

TEST(Embed, NormalizesProviderOutput) {
  FixedProvider p({3.0f, 4.0f});
  const auto v = embed("x", p);
  EXPECT_FLOAT_EQ(v[0], 0.6f);
  EXPECT_FLOAT_EQ(v[1], 0.8f);
}

TEST(Embed, Errors) {
  HashEmbedding h;
  EXPECT_ERRC(embed("", h), Errc::EmptyText);
  FixedProvider zero({0.0f, 0.0f});
  EXPECT_ERRC(embed("x", zero), Errc::ProviderError);
  EXPECT_ERRC(HashEmbedding(0), Errc::InvalidConfig);
}

TEST(Index, SelfQueryRanksFirstWithScoreOne) {
  HashEmbedding h;
  MemoryIndex idx;
  const std::vector<std::string> summaries{"The lessee pays rent monthly.", "Disputes go to arbitration.",
                                           "Either party may terminate with notice."};
  for (std::size_t i = 0; i < summaries.size(); ++i) idx.upsert(entry("job", i, embed(summaries[i], h), summaries[i]));
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto r = idx.query("job", summaries[i], 3, h);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].entry.section_index, i);
    EXPECT_NEAR(r[0].score, 1.0, 1e-6);
  }
}

TEST(Index, UpsertReplacesSameKey) {
  HashEmbedding h;
  MemoryIndex idx;
  idx.upsert(entry("job", 0, embed("first version", h), "first version"));
  idx.upsert(entry("job", 0, embed("second version", h), "second version"));
  EXPECT_EQ(idx.size("job"), 1u);
  const auto r = idx.query("job", "first version", 5, h);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].entry.summary, "second version");
}

TEST(Index, DimensionAndNormChecks) {
  std::mt19937_64 rng(1);
  MemoryIndex idx(16);
  EXPECT_ERRC(idx.upsert(entry("j", 0, random_unit(rng, 8))), Errc::DimensionMismatch);
  EXPECT_ERRC(idx.upsert(entry("j", 0, {2.0f, 0.0f})), Errc::DimensionMismatch);
  auto not_unit = random_unit(rng, 16);
  not_unit[0] += 0.5f;
  EXPECT_ERRC(idx.upsert(entry("j", 0, not_unit)), Errc::InvalidRequest);

  MemoryIndex adopt;
  adopt.upsert(entry("j", 0, random_unit(rng, 8)));
  EXPECT_EQ(adopt.dimension(), 8u);
  EXPECT_ERRC(adopt.upsert(entry("j", 1, random_unit(rng, 16))), Errc::DimensionMismatch);
}

TEST(Index, EmptyAndZeroK) {
  HashEmbedding h;
  MemoryIndex idx;
  EXPECT_TRUE(idx.query("nobody", "anything", 3, h).empty());
  idx.upsert(entry("job", 0, embed("x y z", h)));
  EXPECT_TRUE(idx.query("job", "x y z", 0, h).empty());
  EXPECT_EQ(idx.query_count(), 2u);
}

TEST(Index, TiesBreakByLowerSectionIndex) {
  MemoryIndex idx;
  const std::vector<float> same{1.0f, 0.0f};
  for (std::size_t i : {4u, 1u, 3u, 0u, 2u}) idx.upsert(entry("job", i, same));
  const auto r = idx.query_vector("job", same, 5);
  ASSERT_EQ(r.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r[i].entry.section_index, i);
}

TEST(Index, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  const std::size_t d = 32;
  MemoryIndex idx;
  std::vector<std::vector<float>> stored;
  for (std::size_t i = 0; i < 1000; ++i) {
    stored.push_back(random_unit(rng, d));
    idx.upsert(entry("job", i, stored.back()));
  }
  for (int q = 0; q < 20; ++q) {
    const auto query = random_unit(rng, d);
    for (std::size_t k : {1u, 3u, 5u, 10u, 1000u, 2000u}) {
      const auto got = idx.query_vector("job", query, k);
      const auto want = oracle::top_k(stored, query, k);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].entry.section_index, want[i].first);
        EXPECT_EQ(got[i].score, want[i].second);
      }
    }
  }
}

TEST(Index, JobIsolationProperty) {
  std::mt19937_64 rng(8);
  MemoryIndex idx;
  for (int i = 0; i < 200; ++i) {
    idx.upsert(entry("job-" + std::to_string(rng() % 5), rng() % 30, random_unit(rng, 8)));
  }
  for (int j = 0; j < 5; ++j) {
    const std::string job = "job-" + std::to_string(j);
    for (const auto& r : idx.query_vector(job, random_unit(rng, 8), 100)) EXPECT_EQ(r.entry.job_id, job);
    EXPECT_EQ(idx.query_vector(job, random_unit(rng, 8), 100).size(), idx.size(job));
  }
  idx.remove_job("job-0");
  EXPECT_EQ(idx.size("job-0"), 0u);
}

TEST(Index, RankingIsScaleInvariantProperty) {
  std::mt19937_64 rng(77);
  MemoryIndex idx;
  for (std::size_t i = 0; i < 64; ++i) idx.upsert(entry("job", i, random_unit(rng, 16)));
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int t = 0; t < 100; ++t) {
    auto q = random_unit(rng, 16);
    const auto base = idx.query_vector("job", q, 10);
    const float c = scale(rng);
    for (auto& x : q) x *= c;
    const auto scaled = idx.query_vector("job", q, 10);
    ASSERT_EQ(base.size(), scaled.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      // Float rounding can swap near-ties; compare when the gap is clear.
      if (i + 1 < base.size() && base[i].score - base[i + 1].score < 1e-5) continue;
      if (i > 0 && base[i - 1].score - base[i].score < 1e-5) continue;
      EXPECT_EQ(base[i].entry.section_index, scaled[i].entry.section_index);
    }
  }
}

TEST(Index, ObserverSeesTrafficInOrder) {
  struct Recorder : MemoryObserver {
    std::vector<std::string> events;
    void on_upsert(const MemoryEntry& e) override { events.push_back("upsert " + e.id()); }
    void on_query(std::string_view job, std::string_view text, std::size_t k) override {
      events.push_back("query " + std::string(job) + " " + std::string(text) + " " + std::to_string(k));
    }
  };
  auto rec = std::make_shared<Recorder>();
  HashEmbedding h;
  MemoryIndex idx;
  idx.set_observer(rec);
  idx.upsert(entry("j", 0, embed("a b c", h)));
  idx.query("j", "abc", 2, h);
  EXPECT_EQ(rec->events, (std::vector<std::string>{"upsert j#0", "query j abc 2"}));
}

TEST(Hex, RoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  std::vector<float> v;
  for (int i = 0; i < 1000; ++i) v.push_back(std::bit_cast<float>(static_cast<std::uint32_t>(rng())));
  v.push_back(-0.0f);
  v.push_back(std::numeric_limits<float>::denorm_min());
  const auto back = decode_floats_hex(encode_floats_hex(v));
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i]), std::bit_cast<std::uint32_t>(v[i]));
  }
  EXPECT_EQ(encode_floats_hex(std::vector<float>{1.0f}), "0000803f");
  EXPECT_ERRC(decode_floats_hex("abc"), Errc::CorruptRecord);
  EXPECT_ERRC(decode_floats_hex("zzzzzzzz"), Errc::CorruptRecord);
}

TEST(Persistence, ReplayReconstructsBitExactly) {
  testing::TempDir dir;
  std::mt19937_64 rng(3);
  MemoryIndex live;
  live.persist_to(dir.path());
  for (std::size_t i = 0; i < 20; ++i) live.upsert(entry("job/a", i % 12, random_unit(rng, 24), "sum " + std::to_string(i)));
  for (std::size_t i = 0; i < 5; ++i) live.upsert(entry("job-b", i, random_unit(rng, 24)));

  MemoryIndex restored;
  restored.replay(dir.path());
  for (const char* job : {"job/a", "job-b"}) {
    const auto a = live.entries(job);
    const auto b = restored.entries(job);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].section_index, b[i].section_index);
      EXPECT_EQ(a[i].summary, b[i].summary);
      EXPECT_EQ(encode_floats_hex(a[i].embedding), encode_floats_hex(b[i].embedding));
    }
  }
}

TEST(Persistence, TornLastLineIsIgnoredButCorruptionIsNot) {
  testing::TempDir dir;
  std::mt19937_64 rng(4);
  {
    MemoryIndex live;
    live.persist_to(dir.path());
    live.upsert(entry("job", 0, random_unit(rng, 8)));
    live.upsert(entry("job", 1, random_unit(rng, 8)));
  }
  const auto log = dir.path() / "job.memory.log";
  ASSERT_TRUE(std::filesystem::exists(log));
  {
    std::ofstream out(log, std::ios::app);
    out << R"({"job_id":"job","section_index":2,"ti)";
  }
  MemoryIndex restored;
  restored.replay(dir.path());
  EXPECT_EQ(restored.size("job"), 2u);

  {
    std::ofstream out(log, std::ios::app);
    out << "\n" << R"({"job_id":"job","section_index":3})" << "\n";
  }
  MemoryIndex broken;
  EXPECT_ERRC(broken.replay(dir.path()), Errc::CorruptRecord);
}

TEST(Concurrency, ReadersSeeConsistentSnapshots) {
  MemoryIndex idx;
  std::atomic<bool> done{false};
  std::thread writer([&] {
    std::mt19937_64 rng(6);
    for (std::size_t i = 0; i < 500; ++i) idx.upsert(entry("job", i, random_unit(rng, 16)));
    done = true;
  });
  std::mt19937_64 rng(7);
  std::size_t last = 0;
  while (!done) {
    const auto r = idx.query_vector("job", random_unit(rng, 16), 1000);
    EXPECT_GE(r.size(), last);
    last = r.size();
    for (const auto& q : r) ASSERT_EQ(q.entry.embedding.size(), 16u);
  }
  writer.join();
  EXPECT_EQ(idx.size("job"), 500u);
}

}  // namespace
}  // namespace drafter
