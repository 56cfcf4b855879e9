#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace drafter {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Provider output, not necessarily normalized.
  virtual std::vector<float> raw_embedding(std::string_view text) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string id() const = 0;
};

/// Offline provider: signed feature hashing of character 3- and 4-grams of
/// the lowercased text into `dimension` buckets. Deterministic per seed.
class HashEmbedding final : public EmbeddingProvider {
 public:
  explicit HashEmbedding(std::size_t dimension = 256, std::uint64_t seed = 0);

  std::vector<float> raw_embedding(std::string_view text) override;
  std::size_t dimension() const override { return dimension_; }
  std::string id() const override { return "hash-ngram"; }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

struct RemoteEmbeddingConfig {
  std::string endpoint_url;
  std::string model_name;
  std::string api_key_env_var_name;
  std::size_t dimension = 0;
  int timeout_ms = 30000;
};

/// POST {model, input} and read data[0].embedding (or a top-level
/// "embedding" array).
class RemoteEmbedding final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedding(RemoteEmbeddingConfig config);

  std::vector<float> raw_embedding(std::string_view text) override;
  std::size_t dimension() const override { return config_.dimension; }
  std::string id() const override { return config_.model_name; }

 private:
  RemoteEmbeddingConfig config_;
};

/// Unit-L2 embedding of `text`. Errors: EmptyText, ProviderError when the
/// provider returns a zero vector.
std::vector<float> embed(std::string_view text, EmbeddingProvider& provider);

void normalize_in_place(std::span<float> v);

struct MemoryEntry {
  std::string job_id;
  std::size_t section_index = 0;
  std::string title;
  std::string summary;
  std::vector<float> embedding;

  /// "<job_id>#<section_index>"
  std::string id() const;
};

struct QueryResult {
  MemoryEntry entry;
  double score = 0.0;
};

/// Receives index traffic in the order it happens. Used by tests and the
/// section trace to check ordering contracts.
class MemoryObserver {
 public:
  virtual ~MemoryObserver() = default;
  virtual void on_upsert(const MemoryEntry& entry) = 0;
  virtual void on_query(std::string_view job_id, std::string_view query_text, std::size_t k) = 0;
};

/// Exact cosine top-k over per-job summary embeddings. Entries are unit
/// vectors so the score is a dot product accumulated in double precision.
/// Reads run concurrently; writes are serialized.
class MemoryIndex {
 public:
  /// dimension 0 adopts the dimension of the first upserted entry.
  explicit MemoryIndex(std::size_t dimension = 0);
  ~MemoryIndex();

  MemoryIndex(const MemoryIndex&) = delete;
  MemoryIndex& operator=(const MemoryIndex&) = delete;

  /// Errors: DimensionMismatch, InvalidRequest (embedding not unit norm).
  void upsert(MemoryEntry entry);

  /// Results sorted by score descending, ties by lower section_index;
  /// size = min(k, entries of job_id).
  std::vector<QueryResult> query(std::string_view job_id, std::string_view query_text, std::size_t k,
                                 EmbeddingProvider& provider) const;
  std::vector<QueryResult> query_vector(std::string_view job_id, std::span<const float> query, std::size_t k) const;

  std::size_t size(std::string_view job_id) const;
  std::size_t dimension() const;
  std::vector<MemoryEntry> entries(std::string_view job_id) const;
  void remove_job(std::string_view job_id);

  std::uint64_t upsert_count() const noexcept { return upserts_.load(); }
  std::uint64_t query_count() const noexcept { return queries_.load(); }

  void set_observer(std::shared_ptr<MemoryObserver> observer);

  /// Appends every later upsert to <dir>/<job_id>.memory.log.
  void persist_to(std::filesystem::path dir);
  /// Replays every *.memory.log under dir into this index.
  void replay(const std::filesystem::path& dir);

 private:
  struct JobEntries {
    std::vector<MemoryEntry> entries;
    std::vector<float> matrix;  // row-major, entries.size() x dimension
    std::unordered_map<std::size_t, std::size_t> row_of;
  };

  void insert_locked(MemoryEntry entry);
  void notify_query(std::string_view job_id, std::string_view query_text, std::size_t k) const;
  std::vector<QueryResult> scan(std::string_view job_id, std::span<const float> q, std::size_t k) const;
  void append_record(const MemoryEntry& entry);

  mutable std::shared_mutex mutex_;
  std::size_t dimension_;
  std::unordered_map<std::string, JobEntries> jobs_;
  std::shared_ptr<MemoryObserver> observer_;
  std::filesystem::path persist_dir_;
  std::mutex log_mutex_;
  std::atomic<std::uint64_t> upserts_{0};
  mutable std::atomic<std::uint64_t> queries_{0};
};

/// Base-16 little-endian float32 encoding used by the persistence log.
std::string encode_floats_hex(std::span<const float> values);
std::vector<float> decode_floats_hex(std::string_view hex);

}  // namespace drafter
