// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dtr/rng.hpp"
#include "dtr/tape.hpp"
#include "dtr/text.hpp"

namespace dtr {

struct CnnConfig {
  std::size_t embedding_dim = 64;
  std::size_t filters = 64;
  std::size_t window = 3;
  bool operator==(const CnnConfig&) const = default;
};

struct TransformerConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 2;
  std::size_t max_len = 32;

  // Desk-scale preset used by the tests and experiments.
  static TransformerConfig tiny_libert() { return {2, 64, 2, 32}; }
  // The compact in-domain model size (6 layers, 512 hidden, 8 heads).
  static TransformerConfig libert() { return {6, 512, 8, 32}; }

  void validate() const;
  // Number of tensors and scalars the encoder registers for a vocabulary of vocab_size.
  std::size_t tensor_count() const { return 2 + 16 * layers + 3; }
  std::size_t parameter_count(std::size_t vocab_size) const;
  bool operator==(const TransformerConfig&) const = default;
};

inline constexpr double kLayerNormEps = 1e-5;

namespace init {
template <typename T>
void uniform(Parameter<T>& p, Rng& rng, double limit) {
  for (T& v : p.value.data) v = static_cast<T>(rng.uniform(-limit, limit));
}
// Glorot uniform over a (fan_in, fan_out) kernel.
template <typename T>
void glorot(Parameter<T>& p, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows + p.value.cols));
  uniform(p, rng, limit);
}
template <typename T>
void fill(Parameter<T>& p, T v) {
  std::fill(p.value.data.begin(), p.value.data.end(), v);
}
}  // namespace init

// Word CNN for one text field: embed, one filter bank over windows of
// `window` words, relu, max-pool over positions. Trailing PAD tokens are
// ignored; shorter inputs are PAD-padded up to the window width.
template <typename T>
class CnnEncoder {
 public:
  CnnEncoder(ParameterStore<T>& store, const std::string& prefix, Parameter<T>& embedding, const CnnConfig& config,
             Rng& rng);

  Var encode(Tape<T>& tape, std::span<const TokenId> ids) const;
  std::size_t output_dim() const { return filters_.shape[1]; }
  std::uint64_t calls() const { return calls_.load(); }

  Parameter<T>& embedding() const { return embedding_; }
  Parameter<T>& filters() const { return filters_; }
  Parameter<T>& bias() const { return bias_; }

 private:
  Parameter<T>& embedding_;
  Parameter<T>& filters_;  // (window * dim, filters)
  Parameter<T>& bias_;     // (filters)
  std::size_t window_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Pre-norm transformer over subword ids starting with [CLS]. encode()
// returns the final-layer-norm output at position 0.
template <typename T>
class TransformerEncoder {
 public:
  TransformerEncoder(ParameterStore<T>& store, const std::string& prefix, const TransformerConfig& config,
                     std::size_t vocab_size, Rng& rng);

  // (m, hidden) final hidden states.
  Var encode_sequence(Tape<T>& tape, std::span<const TokenId> ids) const;
  Var encode(Tape<T>& tape, std::span<const TokenId> ids) const;
  // Logits over the subword vocabulary for the given hidden rows, using the
  // token embedding matrix as the output projection.
  Var mlm_logits(Tape<T>& tape, Var hidden_rows) const;

  const TransformerConfig& config() const { return config_; }
  std::size_t output_dim() const { return config_.hidden; }
  std::size_t vocab_size() const { return token_embedding_.value.rows; }
  std::uint64_t calls() const { return calls_.load(); }

  Parameter<T>& token_embedding() const { return token_embedding_; }
  Parameter<T>& position_embedding() const { return position_embedding_; }

 private:
  struct Layer {
    Parameter<T>* ln1_gain;
    Parameter<T>* ln1_bias;
    Parameter<T>* q_kernel;
    Parameter<T>* q_bias;
    Parameter<T>* k_kernel;
    Parameter<T>* k_bias;
    Parameter<T>* v_kernel;
    Parameter<T>* v_bias;
    Parameter<T>* out_kernel;
    Parameter<T>* out_bias;
    Parameter<T>* ln2_gain;
    Parameter<T>* ln2_bias;
    Parameter<T>* ffn_in_kernel;
    Parameter<T>* ffn_in_bias;
    Parameter<T>* ffn_out_kernel;
    Parameter<T>* ffn_out_bias;
  };

  TransformerConfig config_;
  Parameter<T>& token_embedding_;
  Parameter<T>& position_embedding_;
  std::vector<Layer> layers_;
  Parameter<T>* final_gain_ = nullptr;
  Parameter<T>* final_bias_ = nullptr;
  Parameter<T>* mlm_bias_ = nullptr;
  mutable std::atomic<std::uint64_t> calls_{0};
};

struct MaskedSequence {
  std::vector<TokenId> ids;
  std::vector<std::size_t> positions;
  std::vector<TokenId> targets;
};

// Selects each non-[CLS] position with probability mask_prob; a selected
// position becomes [MASK] (80%), a random regular token (10%) or stays (10%).
MaskedSequence mask_tokens(std::span<const TokenId> ids, double mask_prob, std::uint64_t seed,
                           std::size_t vocab_size);

// Mean cross-entropy of the tied-weight prediction at every masked position
// of the batch. Throws if the batch has no masked position.
template <typename T>
Var mlm_loss(Tape<T>& tape, const TransformerEncoder<T>& encoder, std::span<const MaskedSequence> batch);

}  // namespace dtr
