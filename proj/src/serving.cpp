// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/serving.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>
#include <thread>

#include "dtr/checkpoint.hpp"
#include "dtr/config.hpp"

namespace dtr {

namespace {

constexpr char kStoreMagic[4] = {'D', 'T', 'E', 'S'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void patch_u64(std::vector<std::uint8_t>& out, std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

const std::string& target_text(const Document& d, const std::string& field) {
  for (const auto& f : d.target_fields)
    if (f.field_name == field) return f.text;
  throw DataError("document " + d.doc_id + ": missing field '" + field + "'");
}

}  // namespace

std::vector<Document> unique_documents(const Dataset& data) {
  std::vector<Document> out;
  std::map<std::string, std::size_t> seen;
  for (const auto& ex : data)
    for (const auto& d : ex.documents) {
      auto [it, inserted] = seen.emplace(d.doc_id, out.size());
      if (inserted) {
        out.push_back(d);
      } else if (out[it->second].target_fields != d.target_fields) {
        throw DataError("document id " + d.doc_id + " appears with different target fields");
      }
    }
  return out;
}

void precompute_embeddings(const Model<float>& model, std::uint64_t fingerprint, std::span<const Document> documents,
                           const std::filesystem::path& path, std::int64_t timestamp) {
  const ModelSpec& spec = model.spec();
  if (!spec.deep()) throw ConfigError("precompute: the model has no text encoders");
  std::vector<const Document*> docs;
  for (const auto& d : documents) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(), [](const Document* a, const Document* b) { return a->doc_id < b->doc_id; });
  for (std::size_t i = 1; i < docs.size(); ++i)
    if (docs[i]->doc_id == docs[i - 1]->doc_id) throw DataError("precompute: duplicate doc_id " + docs[i]->doc_id);

  const std::size_t dim = spec.embedding_dim();
  const std::size_t nf = spec.target_fields.size();
  std::vector<std::uint8_t> out(kStoreMagic, kStoreMagic + 4);
  put_u32(out, kStoreVersion);
  put_u64(out, fingerprint);
  put_u64(out, static_cast<std::uint64_t>(timestamp));
  put_u32(out, static_cast<std::uint32_t>(nf));
  put_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& f : spec.target_fields) {
    put_u32(out, static_cast<std::uint32_t>(f.size()));
    out.insert(out.end(), f.begin(), f.end());
  }
  put_u64(out, docs.size());
  const std::size_t offsets_at = out.size();
  out.resize(out.size() + 8 * docs.size());
  std::vector<std::size_t> payload_slots;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    patch_u64(out, offsets_at + 8 * i, out.size());
    put_u32(out, static_cast<std::uint32_t>(docs[i]->doc_id.size()));
    out.insert(out.end(), docs[i]->doc_id.begin(), docs[i]->doc_id.end());
    payload_slots.push_back(out.size());
    put_u64(out, 0);
  }
  PreparedExample<float> ex;
  ex.targets.resize(1);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    patch_u64(out, payload_slots[i], out.size());
    ex.targets[0].clear();
    for (const auto& f : spec.target_fields) ex.targets[0].push_back(model.tokenize(target_text(*docs[i], f), false));
    for (const Matrix<float>& e : model.target_embeddings(ex, 0))
      for (float v : e.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  write_file_atomic(path, out);
}

std::shared_ptr<const EmbeddingStore> EmbeddingStore::open(const std::filesystem::path& path) {
  std::shared_ptr<EmbeddingStore> s(new EmbeddingStore());
  s->path_ = path;
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw DataError("cannot open embedding store " + path.string());
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw DataError("cannot stat embedding store " + path.string());
  }
  s->size_ = static_cast<std::size_t>(st.st_size);
  if (s->size_ > 0) {
    void* p = ::mmap(nullptr, s->size_, PROT_READ, MAP_PRIVATE, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      throw DataError("cannot map embedding store " + path.string());
    }
    s->data_ = static_cast<const std::uint8_t*>(p);
  }
  ::close(fd);

  auto corrupt = [&](const std::string& why) { return DataError("embedding store " + path.string() + ": " + why); };
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (s->size_ - pos < n) throw corrupt("truncated");
  };
  need(4 + 4 + 8 + 8 + 4 + 4);
  if (std::memcmp(s->data_, kStoreMagic, 4) != 0) throw corrupt("bad magic");
  if (get_u32(s->data_ + 4) != kStoreVersion) throw corrupt("unsupported version");
  s->fingerprint_ = get_u64(s->data_ + 8);
  s->timestamp_ = static_cast<std::int64_t>(get_u64(s->data_ + 16));
  const std::uint32_t nf = get_u32(s->data_ + 24);
  s->dim_ = get_u32(s->data_ + 28);
  pos = 32;
  for (std::uint32_t i = 0; i < nf; ++i) {
    need(4);
    const std::uint32_t len = get_u32(s->data_ + pos);
    pos += 4;
    need(len);
    s->fields_.emplace_back(reinterpret_cast<const char*>(s->data_ + pos), len);
    pos += len;
  }
  need(8);
  s->count_ = get_u64(s->data_ + pos);
  pos += 8;
  need(8 * s->count_);
  s->index_offset_ = pos;
  // Validate the last payload lies inside the file.
  if (s->count_ > 0) {
    std::uint64_t payload = 0;
    const std::size_t key_off = get_u64(s->data_ + pos + 8 * (s->count_ - 1));
    if (key_off + 4 > s->size_) throw corrupt("index out of range");
    const std::uint32_t klen = get_u32(s->data_ + key_off);
    if (key_off + 4 + klen + 8 > s->size_) throw corrupt("index out of range");
    payload = get_u64(s->data_ + key_off + 4 + klen);
    if (payload + 4 * nf * s->dim_ > s->size_) throw corrupt("payload out of range");
  }
  return s;
}

EmbeddingStore::~EmbeddingStore() {
  if (data_ != nullptr) ::munmap(const_cast<std::uint8_t*>(data_), size_);
}

std::string_view EmbeddingStore::key_at(std::size_t i, std::uint64_t* payload) const {
  const std::size_t off = get_u64(data_ + index_offset_ + 8 * i);
  const std::uint32_t len = get_u32(data_ + off);
  if (payload != nullptr) *payload = get_u64(data_ + off + 4 + len);
  return {reinterpret_cast<const char*>(data_ + off + 4), len};
}

std::optional<std::size_t> EmbeddingStore::find(std::string_view doc_id, std::uint64_t* payload) const {
  std::size_t lo = 0, hi = count_;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::string_view key = key_at(mid, nullptr);
    if (key < doc_id) lo = mid + 1;
    else hi = mid;
  }
  if (lo < count_ && key_at(lo, payload) == doc_id) return lo;
  return std::nullopt;
}

bool EmbeddingStore::contains(std::string_view doc_id) const { return find(doc_id, nullptr).has_value(); }

std::optional<std::vector<Matrix<float>>> EmbeddingStore::lookup(std::string_view doc_id) const {
  std::uint64_t payload = 0;
  if (!find(doc_id, &payload)) return std::nullopt;
  std::vector<Matrix<float>> out;
  const std::uint8_t* p = data_ + payload;
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    Matrix<float> m(1, dim_);
    for (std::size_t k = 0; k < dim_; ++k, p += 4) m.data[k] = std::bit_cast<float>(get_u32(p));
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::string> EmbeddingStore::ids() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count_; ++i) out.emplace_back(key_at(i, nullptr));
  return out;
}

std::shared_ptr<const EmbeddingStore> StoreHandle::current() const {
  std::lock_guard<std::mutex> lock(mu_);
  return store_;
}

void StoreHandle::refresh(const Model<float>& model, std::uint64_t fingerprint, std::span<const Document> documents,
                          std::int64_t timestamp) {
  std::filesystem::path path;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (!store_) throw Error("refresh: no active store");
    path = store_->path();
  }
  precompute_embeddings(model, fingerprint, documents, path, timestamp);
  auto fresh = EmbeddingStore::open(path);
  std::lock_guard<std::mutex> lock(mu_);
  store_ = std::move(fresh);
}

std::vector<RankedDoc> sort_ranked(std::vector<RankedDoc> docs) {
  std::sort(docs.begin(), docs.end(), [](const RankedDoc& a, const RankedDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  return docs;
}

namespace {
std::vector<RankedDoc> zip(const RankingExample& query, const std::vector<double>& scores) {
  std::vector<RankedDoc> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({query.documents[i].doc_id, scores[i]});
  return out;
}
}  // namespace

std::vector<RankedDoc> rank_all_decoding(const Model<float>& model, const RankingExample& query) {
  return sort_ranked(zip(query, model.score(query)));
}

std::vector<RankedDoc> rank_with_store(const Model<float>& model, std::uint64_t fingerprint,
                                       const RankingExample& query, const EmbeddingStore& store) {
  if (store.fingerprint() != fingerprint) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "store fingerprint %016llx does not match model %016llx",
                  static_cast<unsigned long long>(store.fingerprint()), static_cast<unsigned long long>(fingerprint));
    throw StaleStoreError(buf);
  }
  const ModelSpec& spec = model.spec();
  if (!spec.deep()) throw ConfigError("rank_with_store: the model has no text encoders");
  if (store.fields() != spec.target_fields || store.dim() != spec.embedding_dim())
    throw StaleStoreError("store layout does not match the model's target fields");
  if (query.documents.empty()) return {};
  std::vector<std::vector<Matrix<float>>> embs;
  std::vector<std::string> missing;
  for (const auto& d : query.documents) {
    auto e = store.lookup(d.doc_id);
    if (!e) missing.push_back(d.doc_id);
    else embs.push_back(std::move(*e));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw DataError("rank_with_store: " + std::to_string(missing.size()) + " candidate(s) missing from store: " + list);
  }
  const PreparedExample<float> ex = model.prepare(query, false);
  Tape<float> tape(false);
  const std::vector<Var> sources = model.encode_sources(tape, ex);
  std::vector<std::vector<Var>> targets;
  targets.reserve(embs.size());
  for (auto& doc : embs) {
    std::vector<Var> fields;
    for (auto& m : doc) fields.push_back(tape.constant(std::move(m)));
    targets.push_back(std::move(fields));
  }
  const Matrix<float>& s = tape.value(model.score_embeddings(tape, sources, targets, ex.features));
  return sort_ranked(zip(query, {s.data.begin(), s.data.end()}));
}

TwoPassResult two_pass_rank(const Model<float>& first_pass, const Model<float>& deep, const RankingExample& query,
                            std::size_t k) {
  TwoPassResult out;
  if (query.documents.empty()) return out;
  const std::vector<RankedDoc> first = rank_all_decoding(first_pass, query);
  const std::size_t top = std::min(k, first.size());
  if (top > 0) {
    std::map<std::string, const Document*> by_id;
    for (const auto& d : query.documents) by_id.emplace(d.doc_id, &d);
    RankingExample sub;
    sub.query_id = query.query_id;
    sub.source_fields = query.source_fields;
    for (std::size_t i = 0; i < top; ++i) {
      sub.documents.push_back(*by_id.at(first[i].doc_id));
      out.rescored.push_back(first[i].doc_id);
    }
    out.ranking = rank_all_decoding(deep, sub);
  }
  out.ranking.insert(out.ranking.end(), first.begin() + static_cast<std::ptrdiff_t>(top), first.end());
  return out;
}

double nearest_rank_percentile(std::vector<double> samples, double p) {
  if (samples.empty()) throw DataError("percentile of an empty sample");
  if (!(p > 0.0 && p <= 100.0)) throw ConfigError("percentile must be in (0, 100]");
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
  return samples[std::max<std::size_t>(rank, 1) - 1];
}

std::string LatencyReport::to_json() const {
  Json j;
  j["mode"] = mode;
  j["requests"] = requests;
  j["warmup"] = warmup;
  j["concurrency"] = concurrency;
  j["p50_ms"] = p50_ms;
  j["p95_ms"] = p95_ms;
  j["p99_ms"] = p99_ms;
  j["mean_ms"] = mean_ms;
  j["config"] = config.empty() ? Json::object() : Json::parse(config);
  return j.dump(2);
}

std::string LatencyReport::to_table() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s requests=%zu  p50=%.3fms  p95=%.3fms  p99=%.3fms  mean=%.3fms\n",
                mode.c_str(), requests, p50_ms, p95_ms, p99_ms, mean_ms);
  return buf;
}

LatencyReport latency_bench(const std::vector<RankingExample>& workload, const std::string& mode,
                            const std::function<void(const RankingExample&)>& request, const BenchOptions& options) {
  if (workload.empty()) throw DataError("latency_bench: empty workload");
  if (options.repetitions == 0 || options.concurrency == 0)
    throw ConfigError("latency_bench: repetitions and concurrency must be positive");
  for (std::size_t i = 0; i < options.warmup; ++i) request(workload[i % workload.size()]);

  const std::size_t total = workload.size() * options.repetitions;
  std::vector<double> samples(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
      const auto t0 = std::chrono::steady_clock::now();
      request(workload[i % workload.size()]);
      samples[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  if (options.concurrency == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < options.concurrency; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  LatencyReport r;
  r.mode = mode;
  r.requests = total;
  r.warmup = options.warmup;
  r.concurrency = options.concurrency;
  r.p50_ms = nearest_rank_percentile(samples, 50);
  r.p95_ms = nearest_rank_percentile(samples, 95);
  r.p99_ms = nearest_rank_percentile(samples, 99);
  double sum = 0.0;
  for (double v : samples) sum += v;
  r.mean_ms = sum / static_cast<double>(total);
  Json cfg;
  cfg["warmup"] = options.warmup;
  cfg["repetitions"] = options.repetitions;
  cfg["concurrency"] = options.concurrency;
  cfg["workload_requests"] = workload.size();
  r.config = cfg.dump();
  return r;
}

std::vector<RankingExample> make_bench_workload(const Dataset& queries, std::span<const Document> pool,
                                                std::size_t requests, std::size_t candidates, std::uint64_t seed) {
  if (queries.empty()) throw DataError("bench workload: no queries");
  if (candidates > pool.size())
    throw DataError("bench workload: " + std::to_string(candidates) + " candidates requested from a pool of " +
                    std::to_string(pool.size()));
  Rng rng(seed);
  std::vector<std::size_t> idx(pool.size());
  std::vector<RankingExample> out;
  for (std::size_t r = 0; r < requests; ++r) {
    const RankingExample& q = queries[r % queries.size()];
    RankingExample req;
    req.query_id = q.query_id + "#" + std::to_string(r);
    req.source_fields = q.source_fields;
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    // Partial Fisher-Yates: the first `candidates` slots are the sample.
    for (std::size_t i = 0; i < candidates; ++i) {
      const std::size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
      req.documents.push_back(pool[idx[i]]);
    }
    out.push_back(std::move(req));
  }
  return out;
}

}  // namespace dtr
