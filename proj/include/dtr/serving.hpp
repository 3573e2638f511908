// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtr/dataset.hpp"
#include "dtr/model.hpp"

namespace dtr {

inline constexpr std::uint32_t kStoreVersion = 1;

// Raised when a store does not belong to the model asking for it.
class StaleStoreError : public Error {
 public:
  using Error::Error;
};

// Distinct documents by id, in first-seen order. Documents repeating an id
// must repeat its target fields too.
std::vector<Document> unique_documents(const Dataset& data);

// Encodes every document's target fields and writes a "DTES" store: header
// (magic, version, fingerprint, timestamp, field names, dim), a sorted doc_id
// index with payload offsets, then little-endian float32 payloads. The file
// is replaced atomically. Same inputs give the same bytes.
void precompute_embeddings(const Model<float>& model, std::uint64_t fingerprint, std::span<const Document> documents,
                           const std::filesystem::path& path, std::int64_t timestamp = 0);

// Read-only memory-mapped view of a store file. Lookups binary-search the
// index without loading the payloads.
class EmbeddingStore {
 public:
  static std::shared_ptr<const EmbeddingStore> open(const std::filesystem::path& path);
  ~EmbeddingStore();
  EmbeddingStore(const EmbeddingStore&) = delete;
  EmbeddingStore& operator=(const EmbeddingStore&) = delete;

  std::uint64_t fingerprint() const { return fingerprint_; }
  std::int64_t timestamp() const { return timestamp_; }
  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& fields() const { return fields_; }
  const std::filesystem::path& path() const { return path_; }

  // Per-field (1, dim) embeddings, or nullopt when the id is absent.
  std::optional<std::vector<Matrix<float>>> lookup(std::string_view doc_id) const;
  bool contains(std::string_view doc_id) const;
  // Stored ids in index (sorted) order.
  std::vector<std::string> ids() const;

 private:
  EmbeddingStore() = default;
  std::string_view key_at(std::size_t i, std::uint64_t* payload) const;
  std::optional<std::size_t> find(std::string_view doc_id, std::uint64_t* payload) const;

  std::filesystem::path path_;
  const std::uint8_t* data_ = nullptr;
  std::size_t size_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::int64_t timestamp_ = 0;
  std::vector<std::string> fields_;
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::size_t index_offset_ = 0;
};

// The active store for concurrent readers. refresh() rebuilds the file and
// swaps the handle; readers holding the previous store keep a valid view.
class StoreHandle {
 public:
  explicit StoreHandle(std::shared_ptr<const EmbeddingStore> store) : store_(std::move(store)) {}
  std::shared_ptr<const EmbeddingStore> current() const;
  void refresh(const Model<float>& model, std::uint64_t fingerprint, std::span<const Document> documents,
               std::int64_t timestamp = 0);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const EmbeddingStore> store_;
};

struct RankedDoc {
  std::string doc_id;
  double score = 0.0;
  bool operator==(const RankedDoc&) const = default;
};

// Descending score, ties by doc_id.
std::vector<RankedDoc> sort_ranked(std::vector<RankedDoc> docs);

// Encodes every field of every candidate live.
std::vector<RankedDoc> rank_all_decoding(const Model<float>& model, const RankingExample& query);

// Encodes the source fields live and reads target embeddings from the store.
// Only doc_id and traditional features of the candidates are used.
std::vector<RankedDoc> rank_with_store(const Model<float>& model, std::uint64_t fingerprint,
                                       const RankingExample& query, const EmbeddingStore& store);

struct TwoPassResult {
  std::vector<RankedDoc> ranking;
  std::vector<std::string> rescored;  // ids sent to the deep model, first-pass order
};

// First pass scores every candidate; the top k by first-pass score (ties by
// doc_id) are rescored by the deep model and lead the ranking in deep order,
// the rest follow in first-pass order.
TwoPassResult two_pass_rank(const Model<float>& first_pass, const Model<float>& deep, const RankingExample& query,
                            std::size_t k = 300);

struct LatencyReport {
  std::string mode;
  std::size_t requests = 0;
  std::size_t warmup = 0;
  std::size_t concurrency = 1;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  double mean_ms = 0.0;
  std::string config;  // JSON echo of the bench settings

  std::string to_json() const;
  std::string to_table() const;
};

// Nearest-rank percentile (p in (0, 100]) of unsorted samples.
double nearest_rank_percentile(std::vector<double> samples, double p);

struct BenchOptions {
  std::size_t warmup = 50;
  std::size_t repetitions = 1;
  std::size_t concurrency = 1;
};

// Times `request` over every workload entry (repeated), after `warmup`
// untimed calls cycling through the workload.
LatencyReport latency_bench(const std::vector<RankingExample>& workload, const std::string& mode,
                            const std::function<void(const RankingExample&)>& request, const BenchOptions& options);

// Requests pairing each source query with `candidates` documents drawn
// without replacement from the pool.
std::vector<RankingExample> make_bench_workload(const Dataset& queries, std::span<const Document> pool,
                                                std::size_t requests, std::size_t candidates, std::uint64_t seed);

}  // namespace dtr
