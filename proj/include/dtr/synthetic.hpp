// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtr/dataset.hpp"

namespace dtr {

// Shape of a synthetic clickthrough corpus. Words are grouped into topics; a
// topic's words share a leading syllable. Every query has one clicked
// document. With probability 1 - noise the clicked document has strictly the
// largest query-term overlap; otherwise a decoy document does.
struct SyntheticSpec {
  std::size_t vocab_size = 600;
  std::size_t num_topics = 12;
  std::size_t train_queries = 2000;
  std::size_t dev_queries = 500;
  std::size_t test_queries = 500;
  std::size_t docs_per_query = 10;
  std::size_t source_fields = 1;
  std::size_t target_fields = 2;
  std::size_t num_features = 4;
  double noise = 0.1;
  std::size_t query_terms_min = 2;
  std::size_t query_terms_max = 3;
  std::size_t field_words_min = 3;
  std::size_t field_words_max = 6;
  // Share of filler words drawn from a document's own topic.
  double topic_coherence = 0.6;
  // Standard deviation of the noise on the label-correlated feature.
  double feature_noise = 1.0;

  void validate() const;
};

struct SyntheticCorpus {
  Dataset train;
  Dataset dev;
  Dataset test;
};

// Deterministic given (spec, seed).
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed);

// The word list shared by every corpus generated with this spec (independent
// of the seed). Word i belongs to topic i * num_topics / vocab_size.
std::vector<std::string> synthetic_words(const SyntheticSpec& spec);

// Unlabeled topic-coherent sentences over the same vocabulary, for masked
// language model pretraining.
std::vector<std::string> generate_pretraining_corpus(const SyntheticSpec& spec, std::size_t sentences,
                                                     std::uint64_t seed);

// Number of distinct terms of `query_text` that occur in any of `doc`'s target fields.
std::size_t query_term_overlap(const std::string& query_text, const Document& doc);

}  // namespace dtr
