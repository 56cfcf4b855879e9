#include "drafter/memory_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "drafter/error.hpp"
#include "drafter/text.hpp"
#include "http_client.hpp"

namespace drafter {

using json = nlohmann::json;

HashEmbedding::HashEmbedding(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw Error(Errc::InvalidConfig, "embedding dimension must be positive");
}

std::vector<float> HashEmbedding::raw_embedding(std::string_view input) {
  std::vector<float> v(dimension_, 0.0f);
  auto cps = text::decode_utf8(text::to_lower_utf8(input));
  std::u32string padded;
  padded.reserve(cps.size() + 2);
  padded.push_back(U' ');
  for (char32_t cp : cps) padded.push_back(text::is_space(cp) ? U' ' : cp);
  padded.push_back(U' ');

  for (std::size_t n : {3u, 4u}) {
    if (padded.size() < n) continue;
    for (std::size_t i = 0; i + n <= padded.size(); ++i) {
      const auto gram = text::encode_utf8(std::u32string_view(padded).substr(i, n));
      const auto h = text::fnv1a64(gram, seed_ + n);
      v[h % dimension_] += (h >> 63) ? -1.0f : 1.0f;
    }
  }
  return v;
}

RemoteEmbedding::RemoteEmbedding(RemoteEmbeddingConfig config) : config_(std::move(config)) {
  if (config_.endpoint_url.empty()) throw Error(Errc::InvalidConfig, "remote embedding requires endpoint_url");
}

std::vector<float> RemoteEmbedding::raw_embedding(std::string_view input) {
  json body{{"model", config_.model_name}, {"input", std::string(input)}};
  detail::HeaderList headers;
  if (!config_.api_key_env_var_name.empty()) {
    if (const char* key = std::getenv(config_.api_key_env_var_name.c_str()); key && *key) {
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto res = detail::http_post_json(config_.endpoint_url, body.dump(), headers, config_.timeout_ms);
  if (res.transport_failed) {
    throw Error(res.timed_out ? Errc::Timeout : Errc::ProviderError, "embedding endpoint: " + res.error);
  }
  if (res.status != 200) {
    throw Error(Errc::ProviderError, "embedding endpoint HTTP " + std::to_string(res.status));
  }
  try {
    const auto reply = json::parse(res.body);
    const auto& arr = reply.contains("data") ? reply.at("data").at(0).at("embedding") : reply.at("embedding");
    auto v = arr.get<std::vector<float>>();
    if (config_.dimension == 0) config_.dimension = v.size();
    return v;
  } catch (const json::exception& e) {
    throw Error(Errc::ProviderError, std::string("embedding endpoint: ") + e.what());
  }
}

void normalize_in_place(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (norm == 0.0 || !std::isfinite(norm)) throw Error(Errc::ProviderError, "cannot normalize a zero vector");
  for (float& x : v) x = static_cast<float>(x / norm);
}

std::vector<float> embed(std::string_view input, EmbeddingProvider& provider) {
  if (input.empty()) throw Error(Errc::EmptyText, "cannot embed empty text");
  auto v = provider.raw_embedding(input);
  normalize_in_place(v);
  return v;
}

std::string MemoryEntry::id() const { return job_id + "#" + std::to_string(section_index); }

// ---------------------------------------------------------------------------

namespace {

double dot(const float* a, const float* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double l2(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

}  // namespace

MemoryIndex::MemoryIndex(std::size_t dimension) : dimension_(dimension) {}

MemoryIndex::~MemoryIndex() = default;

void MemoryIndex::set_observer(std::shared_ptr<MemoryObserver> observer) {
  std::unique_lock lock(mutex_);
  observer_ = std::move(observer);
}

void MemoryIndex::insert_locked(MemoryEntry entry) {
  if (dimension_ == 0) dimension_ = entry.embedding.size();
  if (entry.embedding.size() != dimension_) {
    throw Error(Errc::DimensionMismatch, "entry has dimension " + std::to_string(entry.embedding.size()) +
                                             ", index holds " + std::to_string(dimension_));
  }
  auto& job = jobs_[entry.job_id];
  const auto it = job.row_of.find(entry.section_index);
  if (it != job.row_of.end()) {
    const auto row = it->second;
    std::copy(entry.embedding.begin(), entry.embedding.end(), job.matrix.begin() + static_cast<std::ptrdiff_t>(row * dimension_));
    job.entries[row] = std::move(entry);
    return;
  }
  job.row_of.emplace(entry.section_index, job.entries.size());
  job.matrix.insert(job.matrix.end(), entry.embedding.begin(), entry.embedding.end());
  job.entries.push_back(std::move(entry));
}

void MemoryIndex::upsert(MemoryEntry entry) {
  if (entry.embedding.empty()) throw Error(Errc::DimensionMismatch, "entry has no embedding");
  {
    std::shared_lock lock(mutex_);
    if (dimension_ != 0 && entry.embedding.size() != dimension_) {
      throw Error(Errc::DimensionMismatch, "embedding has " + std::to_string(entry.embedding.size()) +
                                               " dimensions, index holds " + std::to_string(dimension_));
    }
  }
  const double norm = l2(entry.embedding);
  if (std::abs(norm - 1.0) > 1e-6) {
    throw Error(Errc::InvalidRequest, "embedding norm " + std::to_string(norm) + " is not 1");
  }
  std::shared_ptr<MemoryObserver> observer;
  {
    std::unique_lock lock(mutex_);
    insert_locked(entry);
    observer = observer_;
    ++upserts_;
    if (!persist_dir_.empty()) append_record(entry);
  }
  if (observer) observer->on_upsert(entry);
}

void MemoryIndex::notify_query(std::string_view job_id, std::string_view query_text, std::size_t k) const {
  std::shared_ptr<MemoryObserver> observer;
  {
    std::shared_lock lock(mutex_);
    observer = observer_;
  }
  if (observer) observer->on_query(job_id, query_text, k);
  ++queries_;
}

std::vector<QueryResult> MemoryIndex::query(std::string_view job_id, std::string_view query_text, std::size_t k,
                                            EmbeddingProvider& provider) const {
  notify_query(job_id, query_text, k);
  if (k == 0 || size(job_id) == 0) return {};
  const auto q = embed(query_text, provider);
  return scan(job_id, q, k);
}

std::vector<QueryResult> MemoryIndex::query_vector(std::string_view job_id, std::span<const float> q,
                                                   std::size_t k) const {
  notify_query(job_id, {}, k);
  return scan(job_id, q, k);
}

std::vector<QueryResult> MemoryIndex::scan(std::string_view job_id, std::span<const float> q, std::size_t k) const {
  std::shared_lock lock(mutex_);
  const auto it = jobs_.find(std::string(job_id));
  if (k == 0 || it == jobs_.end() || it->second.entries.empty()) return {};
  if (q.size() != dimension_) {
    throw Error(Errc::DimensionMismatch, "query has dimension " + std::to_string(q.size()) + ", index holds " +
                                             std::to_string(dimension_));
  }
  const auto& job = it->second;
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(job.entries.size());
  for (std::size_t r = 0; r < job.entries.size(); ++r) {
    scored.emplace_back(dot(q.data(), job.matrix.data() + r * dimension_, dimension_), r);
  }
  const auto take = std::min(k, scored.size());
  auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return job.entries[a.second].section_index < job.entries[b.second].section_index;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
  std::vector<QueryResult> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({job.entries[scored[i].second], scored[i].first});
  return out;
}

std::size_t MemoryIndex::size(std::string_view job_id) const {
  std::shared_lock lock(mutex_);
  const auto it = jobs_.find(std::string(job_id));
  return it == jobs_.end() ? 0 : it->second.entries.size();
}

std::size_t MemoryIndex::dimension() const {
  std::shared_lock lock(mutex_);
  return dimension_;
}

std::vector<MemoryEntry> MemoryIndex::entries(std::string_view job_id) const {
  std::shared_lock lock(mutex_);
  const auto it = jobs_.find(std::string(job_id));
  if (it == jobs_.end()) return {};
  auto out = it->second.entries;
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.section_index < b.section_index; });
  return out;
}

void MemoryIndex::remove_job(std::string_view job_id) {
  std::unique_lock lock(mutex_);
  jobs_.erase(std::string(job_id));
}

// ---------------------------------------------------------------------------
// Persistence

std::string encode_floats_hex(std::span<const float> values) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(values.size() * 8);
  for (float f : values) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int byte = 0; byte < 4; ++byte) {
      const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xFF);
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 0xF]);
    }
  }
  return out;
}

std::vector<float> decode_floats_hex(std::string_view hex) {
  if (hex.size() % 8 != 0) throw Error(Errc::CorruptRecord, "hex embedding length is not a multiple of 8");
  auto nibble = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw Error(Errc::CorruptRecord, "invalid hex digit in embedding");
  };
  std::vector<float> out;
  out.reserve(hex.size() / 8);
  for (std::size_t i = 0; i < hex.size(); i += 8) {
    std::uint32_t bits = 0;
    for (int byte = 0; byte < 4; ++byte) {
      const auto b = (nibble(hex[i + 2 * byte]) << 4) | nibble(hex[i + 2 * byte + 1]);
      bits |= b << (8 * byte);
    }
    out.push_back(std::bit_cast<float>(bits));
  }
  return out;
}

namespace {

std::string safe_file_stem(std::string_view job_id) {
  std::string out;
  for (char c : job_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

}  // namespace

void MemoryIndex::persist_to(std::filesystem::path dir) {
  std::filesystem::create_directories(dir);
  std::unique_lock lock(mutex_);
  persist_dir_ = std::move(dir);
}

void MemoryIndex::append_record(const MemoryEntry& entry) {
  std::lock_guard lock(log_mutex_);
  std::ofstream out(persist_dir_ / (safe_file_stem(entry.job_id) + ".memory.log"), std::ios::app | std::ios::binary);
  json rec{{"job_id", entry.job_id},
           {"section_index", entry.section_index},
           {"title", entry.title},
           {"summary", entry.summary},
           {"embedding", encode_floats_hex(entry.embedding)}};
  out << rec.dump() << '\n';
  out.flush();
}

void MemoryIndex::replay(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir)) return;
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    if (f.path().string().ends_with(".memory.log")) files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());
  std::unique_lock lock(mutex_);
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto rec = json::parse(line);
        MemoryEntry e;
        e.job_id = rec.at("job_id").get<std::string>();
        e.section_index = rec.at("section_index").get<std::size_t>();
        e.title = rec.at("title").get<std::string>();
        e.summary = rec.at("summary").get<std::string>();
        e.embedding = decode_floats_hex(rec.at("embedding").get<std::string>());
        insert_locked(std::move(e));
      } catch (const json::exception& ex) {
        // A torn final line is expected after a crash; anything else is corruption.
        if (in.peek() == EOF) break;
        throw Error(Errc::CorruptRecord, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
      }
    }
  }
}

}  // namespace drafter
