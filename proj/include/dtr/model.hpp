// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dtr/dataset.hpp"
#include "dtr/encoders.hpp"
#include "dtr/features.hpp"
#include "dtr/interaction.hpp"
#include "dtr/text.hpp"

namespace dtr {

enum class EncoderKind { kMlp, kCnn, kBert };
std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& name);

struct ModelSpec {
  EncoderKind encoder = EncoderKind::kCnn;
  std::vector<std::string> source_fields{"query"};
  std::vector<std::string> target_fields{"title", "description"};
  std::size_t num_features = 4;
  bool use_features = true;
  bool normalize_features = true;
  bool rescale_features = true;
  InteractionConfig interaction;
  std::size_t hidden = 200;
  CnnConfig cnn;
  TransformerConfig transformer = TransformerConfig::tiny_libert();
  std::size_t source_max_len = 16;
  std::size_t target_max_len = 32;
  // Vocabulary construction (used when vocabularies are built from data).
  std::size_t word_min_count = 1;
  std::size_t subword_merges = 400;

  void validate() const;
  bool deep() const { return encoder != EncoderKind::kMlp; }
  std::size_t embedding_dim() const;
  std::size_t deep_feature_dim() const;
  std::size_t head_input_dim() const;
  bool operator==(const ModelSpec&) const = default;
};

struct Vocabularies {
  WordVocabulary words;
  SubwordVocabulary subwords;
  bool operator==(const Vocabularies&) const = default;
};

// Word vocabulary from every text of `data`, subword vocabulary from
// `subword_corpus` (or from `data` when it is empty). Only the kind the
// encoder needs is built; the other stays reserved-only.
Vocabularies build_vocabularies(const ModelSpec& spec, const Dataset& data,
                                std::span<const std::string> subword_corpus = {});

// One query, tokenized and with its raw feature matrix, ready for scoring.
template <typename T>
struct PreparedExample {
  std::vector<std::vector<TokenId>> sources;               // per source field
  std::vector<std::vector<std::vector<TokenId>>> targets;  // per document, per target field
  Matrix<T> features;                                      // (n, F); 0 columns if unused
  std::vector<double> labels;
  std::size_t size() const { return labels.size(); }
};

template <typename T>
class Model {
 public:
  Model(const ModelSpec& spec, Vocabularies vocab, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelSpec& spec() const { return spec_; }
  const Vocabularies& vocab() const { return vocab_; }
  ParameterStore<T>& parameters() { return store_; }
  const ParameterStore<T>& parameters() const { return store_; }
  FeatureProcessor<T>* features() const { return features_.get(); }

  // A copy with every tensor converted to U.
  template <typename U>
  std::unique_ptr<Model<U>> cast() const;
  // Copies values of same-named tensors from `other`; returns how many.
  std::size_t copy_matching_from(const ParameterStore<T>& other);

  std::vector<TokenId> tokenize(const std::string& text, bool source) const;
  // Target fields are tokenized only when `targets` is set; serving from a
  // store needs the source side and the features alone.
  PreparedExample<T> prepare(const RankingExample& example, bool targets = true) const;

  // (1, d) embedding of one field.
  Var encode_field(Tape<T>& tape, std::span<const TokenId> ids, std::size_t field, bool source) const;
  std::vector<Var> encode_sources(Tape<T>& tape, const PreparedExample<T>& ex) const;
  // Target embeddings of document `doc` as plain (1, d) matrices.
  std::vector<Matrix<T>> target_embeddings(const PreparedExample<T>& ex, std::size_t doc) const;

  // (n, 1) scores for every document of the query.
  Var forward(Tape<T>& tape, const PreparedExample<T>& ex) const;
  // Same head applied to source variables and per-document target variables.
  Var score_embeddings(Tape<T>& tape, std::span<const Var> sources, std::span<const std::vector<Var>> targets,
                       const Matrix<T>& features) const;

  std::vector<double> score(const RankingExample& example) const;
  std::vector<double> score(const PreparedExample<T>& ex) const;

  // How many times source field i has been encoded.
  std::uint64_t source_encode_calls(std::size_t field) const { return source_calls_[field].load(); }

 private:
  ModelSpec spec_;
  Vocabularies vocab_;
  std::uint64_t seed_;
  ParameterStore<T> store_;
  Parameter<T>* word_embedding_ = nullptr;
  std::vector<std::unique_ptr<CnnEncoder<T>>> cnn_sources_;
  std::vector<std::unique_ptr<CnnEncoder<T>>> cnn_targets_;
  std::unique_ptr<TransformerEncoder<T>> bert_;
  std::unique_ptr<FeatureProcessor<T>> features_;
  Parameter<T>* hidden_kernel_ = nullptr;
  Parameter<T>* hidden_bias_ = nullptr;
  Parameter<T>* output_kernel_ = nullptr;
  Parameter<T>* output_bias_ = nullptr;
  std::unique_ptr<std::atomic<std::uint64_t>[]> source_calls_;
};

template <typename T>
template <typename U>
std::unique_ptr<Model<U>> Model<T>::cast() const {
  auto out = std::make_unique<Model<U>>(spec_, vocab_, seed_);
  for (std::size_t i = 0; i < store_.size(); ++i) {
    const Parameter<T>& src = store_[i];
    Parameter<U>* dst = out->parameters().find(src.name);
    if (dst == nullptr || dst->value.rows != src.value.rows || dst->value.cols != src.value.cols)
      throw ShapeError("cast: topology mismatch at " + src.name);
    for (std::size_t k = 0; k < src.value.data.size(); ++k) dst->value.data[k] = static_cast<U>(src.value.data[k]);
  }
  return out;
}

}  // namespace dtr
