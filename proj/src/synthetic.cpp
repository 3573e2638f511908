// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/synthetic.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "dtr/error.hpp"
#include "dtr/rng.hpp"
#include "dtr/text.hpp"

namespace dtr {
namespace {

constexpr const char* kConsonants[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
constexpr std::size_t kSyllables = std::size(kConsonants) * std::size(kVowels);

std::string syllable(std::size_t k) {
  return std::string(kConsonants[k / std::size(kVowels)]) + kVowels[k % std::size(kVowels)];
}

std::string target_field_name(std::size_t i) {
  static const char* names[] = {"title", "description", "company"};
  return i < std::size(names) ? names[i] : "target_" + std::to_string(i);
}

std::string source_field_name(std::size_t i) {
  static const char* names[] = {"query", "user_title", "user_summary"};
  return i < std::size(names) ? names[i] : "source_" + std::to_string(i);
}

class Generator {
 public:
  Generator(const SyntheticSpec& spec, std::uint64_t seed)
      : spec_(spec), rng_(seed), words_(synthetic_words(spec)), topic_words_(spec.num_topics) {
    for (std::size_t i = 0; i < words_.size(); ++i) topic_words_[topic_of(i)].push_back(i);
    feature_scale_.resize(spec.num_features);
    feature_offset_.resize(spec.num_features);
    for (std::size_t k = 0; k < spec.num_features; ++k) {
      static const double scales[] = {40.0, 0.05, 3.0, 900.0};
      static const double offsets[] = {250.0, -0.3, 10.0, 5000.0};
      feature_scale_[k] = scales[k % 4];
      feature_offset_[k] = offsets[k % 4];
    }
  }

  Dataset split(const std::string& name, std::size_t queries) {
    Dataset out;
    out.reserve(queries);
    for (std::size_t q = 0; q < queries; ++q) out.push_back(query(name + "-" + std::to_string(q)));
    return out;
  }

  std::string sentence() {
    const std::size_t topic = rng_.below(spec_.num_topics);
    const std::size_t len = 5 + rng_.below(6);
    std::vector<std::size_t> ws;
    for (std::size_t i = 0; i < len; ++i) ws.push_back(filler_word(topic, {}));
    return join(ws);
  }

 private:
  std::size_t topic_of(std::size_t word) const { return word * spec_.num_topics / spec_.vocab_size; }

  std::size_t filler_word(std::size_t topic, const std::unordered_set<std::size_t>& exclude) {
    for (;;) {
      std::size_t w;
      if (rng_.bernoulli(spec_.topic_coherence)) {
        const auto& pool = topic_words_[topic];
        w = pool[rng_.below(pool.size())];
      } else {
        w = rng_.below(words_.size());
      }
      if (!exclude.contains(w)) return w;
    }
  }

  std::string join(const std::vector<std::size_t>& ids) const {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ' ';
      s += words_[ids[i]];
    }
    return s;
  }

  std::size_t between(std::size_t lo, std::size_t hi) { return lo + rng_.below(hi - lo + 1); }

  RankingExample query(const std::string& qid) {
    RankingExample ex;
    ex.query_id = qid;
    const std::size_t topic = rng_.below(spec_.num_topics);
    const auto& pool = topic_words_[topic];
    const std::size_t q = std::min(between(spec_.query_terms_min, spec_.query_terms_max), pool.size());
    std::vector<std::size_t> terms;
    std::unordered_set<std::size_t> term_set;
    while (terms.size() < q) {
      const std::size_t w = pool[rng_.below(pool.size())];
      if (term_set.insert(w).second) terms.push_back(w);
    }
    ex.source_fields.push_back({source_field_name(0), join(terms)});
    for (std::size_t s = 1; s < spec_.source_fields; ++s) {
      std::vector<std::size_t> ctx;
      const std::size_t len = between(spec_.field_words_min, spec_.field_words_max);
      for (std::size_t i = 0; i < len; ++i) ctx.push_back(filler_word(topic, term_set));
      ex.source_fields.push_back({source_field_name(s), join(ctx)});
    }

    const std::size_t n = spec_.docs_per_query;
    const std::size_t clicked = rng_.below(n);
    std::vector<std::size_t> overlap(n);
    const bool noisy = n > 1 && rng_.bernoulli(spec_.noise);
    if (!noisy) {
      overlap[clicked] = between(1, q);
      for (std::size_t d = 0; d < n; ++d)
        if (d != clicked) overlap[d] = rng_.below(overlap[clicked]);
    } else {
      std::size_t decoy = rng_.below(n - 1);
      if (decoy >= clicked) ++decoy;
      overlap[decoy] = between(1, q);
      for (std::size_t d = 0; d < n; ++d)
        if (d != decoy) overlap[d] = rng_.below(overlap[decoy]);
    }

    for (std::size_t d = 0; d < n; ++d) {
      Document doc;
      doc.doc_id = qid + "-d" + std::to_string(d);
      doc.label = d == clicked ? 1.0 : 0.0;
      const std::size_t doc_topic = d == clicked ? topic : rng_.below(spec_.num_topics);
      std::vector<std::size_t> shared = terms;
      rng_.shuffle(shared.begin(), shared.end());
      shared.resize(overlap[d]);
      std::vector<std::vector<std::size_t>> fields(spec_.target_fields);
      for (std::size_t w : shared) fields[rng_.below(fields.size())].push_back(w);
      for (std::size_t f = 0; f < fields.size(); ++f) {
        const std::size_t len = std::max(fields[f].size(), between(spec_.field_words_min, spec_.field_words_max));
        while (fields[f].size() < len) fields[f].push_back(filler_word(doc_topic, term_set));
        rng_.shuffle(fields[f].begin(), fields[f].end());
        doc.target_fields.push_back({target_field_name(f), join(fields[f])});
      }
      for (std::size_t k = 0; k < spec_.num_features; ++k) {
        const double z = k == 0 ? doc.label + spec_.feature_noise * rng_.normal() : rng_.normal();
        doc.traditional_features.push_back(feature_offset_[k] + feature_scale_[k] * z);
      }
      ex.documents.push_back(std::move(doc));
    }
    return ex;
  }

  const SyntheticSpec& spec_;
  Rng rng_;
  std::vector<std::string> words_;
  std::vector<std::vector<std::size_t>> topic_words_;
  std::vector<double> feature_scale_;
  std::vector<double> feature_offset_;
};

}  // namespace

void SyntheticSpec::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("synthetic spec: ") + name + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(num_topics, "num_topics");
  positive(train_queries, "train_queries");
  positive(dev_queries, "dev_queries");
  positive(test_queries, "test_queries");
  positive(docs_per_query, "docs_per_query");
  positive(source_fields, "source_fields");
  positive(target_fields, "target_fields");
  positive(num_features, "num_features");
  positive(query_terms_min, "query_terms_min");
  positive(field_words_min, "field_words_min");
  if (query_terms_max < query_terms_min) throw ConfigError("synthetic spec: query_terms_max < query_terms_min");
  if (field_words_max < field_words_min) throw ConfigError("synthetic spec: field_words_max < field_words_min");
  if (num_topics > kSyllables) throw ConfigError("synthetic spec: at most 70 topics");
  if (vocab_size < num_topics * (query_terms_max + 2))
    throw ConfigError("synthetic spec: vocab_size too small for the topic count");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("synthetic spec: noise must be in [0, 1]");
  if (!(topic_coherence >= 0.0 && topic_coherence <= 1.0))
    throw ConfigError("synthetic spec: topic_coherence must be in [0, 1]");
  if (!(feature_noise >= 0.0)) throw ConfigError("synthetic spec: feature_noise must be >= 0");
}

std::vector<std::string> synthetic_words(const SyntheticSpec& spec) {
  spec.validate();
  // Fixed stream: the vocabulary does not depend on the corpus seed.
  Rng rng(0x5eed'0f'0c'ab'01ULL);
  std::vector<std::string> words;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < spec.vocab_size; ++i) {
    const std::size_t topic = i * spec.num_topics / spec.vocab_size;
    const std::string stem = syllable((topic * 37) % kSyllables);
    for (;;) {
      std::string w = stem;
      const std::size_t extra = 1 + rng.below(3);
      for (std::size_t k = 0; k < extra; ++k) w += syllable(rng.below(kSyllables));
      if (seen.insert(w).second) {
        words.push_back(std::move(w));
        break;
      }
    }
  }
  return words;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Generator gen(spec, seed);
  SyntheticCorpus c;
  c.train = gen.split("train", spec.train_queries);
  c.dev = gen.split("dev", spec.dev_queries);
  c.test = gen.split("test", spec.test_queries);
  return c;
}

std::vector<std::string> generate_pretraining_corpus(const SyntheticSpec& spec, std::size_t sentences,
                                                     std::uint64_t seed) {
  spec.validate();
  Generator gen(spec, seed);
  std::vector<std::string> out;
  out.reserve(sentences);
  for (std::size_t i = 0; i < sentences; ++i) out.push_back(gen.sentence());
  return out;
}

std::size_t query_term_overlap(const std::string& query_text, const Document& doc) {
  const auto terms = tokenize_words(query_text);
  std::set<std::string> doc_words;
  for (const auto& f : doc.target_fields)
    for (auto& w : tokenize_words(f.text)) doc_words.insert(std::move(w));
  std::set<std::string> distinct(terms.begin(), terms.end());
  std::size_t n = 0;
  for (const auto& t : distinct) n += doc_words.contains(t);
  return n;
}

}  // namespace dtr
