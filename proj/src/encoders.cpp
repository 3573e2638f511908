// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/encoders.hpp"

#include <cmath>
#include <numeric>

#include "dtr/error.hpp"

namespace dtr {

void TransformerConfig::validate() const {
  if (layers == 0 || hidden == 0 || heads == 0 || max_len < 2)
    throw ConfigError("transformer: layers, hidden and heads must be positive and max_len >= 2");
  if (hidden % heads != 0) throw ConfigError("transformer: hidden size must be divisible by the head count");
}

std::size_t TransformerConfig::parameter_count(std::size_t vocab_size) const {
  const std::size_t h = hidden;
  const std::size_t per_layer = 12 * h * h + 13 * h;
  return vocab_size * h + max_len * h + layers * per_layer + 2 * h + vocab_size;
}

// ---------------------------------------------------------------------------
// CNN

template <typename T>
CnnEncoder<T>::CnnEncoder(ParameterStore<T>& store, const std::string& prefix, Parameter<T>& embedding,
                          const CnnConfig& config, Rng& rng)
    : embedding_(embedding),
      filters_(store.add(prefix + "/filters", {config.window * embedding.value.cols, config.filters},
                         ParamGroup::kOther)),
      bias_(store.add(prefix + "/filter_bias", {config.filters}, ParamGroup::kOther)),
      window_(config.window) {
  if (config.window == 0 || config.filters == 0) throw ConfigError("cnn: window and filters must be positive");
  init::glorot(filters_, rng);
}

template <typename T>
Var CnnEncoder<T>::encode(Tape<T>& tape, std::span<const TokenId> ids) const {
  calls_.fetch_add(1, std::memory_order_relaxed);
  std::size_t len = ids.size();
  while (len > 0 && ids[len - 1] == WordVocabulary::kPad) --len;
  std::vector<TokenId> padded(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(len));
  if (padded.size() < window_) padded.resize(window_, WordVocabulary::kPad);
  Var x = ops::embed(tape, tape.param(embedding_), std::span<const TokenId>(padded), WordVocabulary::kPad);
  Var windows = ops::unfold(tape, x, window_);
  Var conv = ops::relu(tape, ops::linear(tape, windows, tape.param(filters_), tape.param(bias_)));
  return ops::max_rows(tape, conv);
}

// ---------------------------------------------------------------------------
// Transformer

template <typename T>
TransformerEncoder<T>::TransformerEncoder(ParameterStore<T>& store, const std::string& prefix,
                                          const TransformerConfig& config, std::size_t vocab_size, Rng& rng)
    : config_(config),
      token_embedding_(store.add(prefix + "/token_embedding", {vocab_size, config.hidden}, ParamGroup::kBert)),
      position_embedding_(
          store.add(prefix + "/position_embedding", {config.max_len, config.hidden}, ParamGroup::kBert)) {
  config.validate();
  const std::size_t h = config.hidden;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = prefix + "/layer_" + std::to_string(l) + "/";
    auto add = [&](const std::string& name, std::vector<std::size_t> shape) {
      return &store.add(p + name, std::move(shape), ParamGroup::kBert);
    };
    Layer layer{};
    layer.ln1_gain = add("ln1_gain", {h});
    layer.ln1_bias = add("ln1_bias", {h});
    layer.q_kernel = add("q_kernel", {h, h});
    layer.q_bias = add("q_bias", {h});
    layer.k_kernel = add("k_kernel", {h, h});
    layer.k_bias = add("k_bias", {h});
    layer.v_kernel = add("v_kernel", {h, h});
    layer.v_bias = add("v_bias", {h});
    layer.out_kernel = add("out_kernel", {h, h});
    layer.out_bias = add("out_bias", {h});
    layer.ln2_gain = add("ln2_gain", {h});
    layer.ln2_bias = add("ln2_bias", {h});
    layer.ffn_in_kernel = add("ffn_in_kernel", {h, 4 * h});
    layer.ffn_in_bias = add("ffn_in_bias", {4 * h});
    layer.ffn_out_kernel = add("ffn_out_kernel", {4 * h, h});
    layer.ffn_out_bias = add("ffn_out_bias", {h});
    layers_.push_back(layer);
  }
  final_gain_ = &store.add(prefix + "/final_ln_gain", {h}, ParamGroup::kBert);
  final_bias_ = &store.add(prefix + "/final_ln_bias", {h}, ParamGroup::kBert);
  mlm_bias_ = &store.add(prefix + "/mlm_bias", {vocab_size}, ParamGroup::kBert);
  init::uniform(token_embedding_, rng, 0.05);
  init::uniform(position_embedding_, rng, 0.05);
  for (Layer& layer : layers_) {
    init::fill(*layer.ln1_gain, T(1));
    init::fill(*layer.ln2_gain, T(1));
    for (Parameter<T>* k : {layer.q_kernel, layer.k_kernel, layer.v_kernel, layer.out_kernel, layer.ffn_in_kernel,
                            layer.ffn_out_kernel})
      init::glorot(*k, rng);
  }
  init::fill(*final_gain_, T(1));
}

template <typename T>
Var TransformerEncoder<T>::encode_sequence(Tape<T>& tape, std::span<const TokenId> ids) const {
  if (ids.empty() || ids.front() != SubwordVocabulary::kCls)
    throw DataError("transformer input must start with [CLS]");
  if (ids.size() > config_.max_len)
    throw DataError("transformer input of " + std::to_string(ids.size()) + " tokens exceeds max_len " +
                    std::to_string(config_.max_len));
  const std::size_t m = ids.size();
  const std::size_t heads = config_.heads;
  const std::size_t dh = config_.hidden / heads;
  const T eps = static_cast<T>(kLayerNormEps);
  const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));

  std::vector<std::size_t> positions(m);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  Var x = ops::add(tape, ops::embed(tape, tape.param(token_embedding_), ids, SubwordVocabulary::kPad),
                   ops::select_rows(tape, tape.param(position_embedding_), std::span<const std::size_t>(positions)));
  for (const Layer& L : layers_) {
    Var a = ops::layer_norm(tape, x, tape.param(*L.ln1_gain), tape.param(*L.ln1_bias), eps);
    Var q = ops::linear(tape, a, tape.param(*L.q_kernel), tape.param(*L.q_bias));
    Var k = ops::linear(tape, a, tape.param(*L.k_kernel), tape.param(*L.k_bias));
    Var v = ops::linear(tape, a, tape.param(*L.v_kernel), tape.param(*L.v_bias));
    std::vector<Var> contexts;
    contexts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      Var qh = ops::slice_cols(tape, q, h * dh, dh);
      Var kh = ops::slice_cols(tape, k, h * dh, dh);
      Var vh = ops::slice_cols(tape, v, h * dh, dh);
      Var attn = ops::softmax_rows(tape, ops::scale(tape, ops::matmul_nt(tape, qh, kh), inv_sqrt_dh));
      contexts.push_back(ops::matmul(tape, attn, vh));
    }
    Var ctx = heads == 1 ? contexts.front() : ops::concat_cols(tape, std::span<const Var>(contexts));
    x = ops::add(tape, x, ops::linear(tape, ctx, tape.param(*L.out_kernel), tape.param(*L.out_bias)));
    Var f = ops::layer_norm(tape, x, tape.param(*L.ln2_gain), tape.param(*L.ln2_bias), eps);
    Var inner = ops::gelu(tape, ops::linear(tape, f, tape.param(*L.ffn_in_kernel), tape.param(*L.ffn_in_bias)));
    x = ops::add(tape, x, ops::linear(tape, inner, tape.param(*L.ffn_out_kernel), tape.param(*L.ffn_out_bias)));
  }
  return ops::layer_norm(tape, x, tape.param(*final_gain_), tape.param(*final_bias_), eps);
}

template <typename T>
Var TransformerEncoder<T>::encode(Tape<T>& tape, std::span<const TokenId> ids) const {
  calls_.fetch_add(1, std::memory_order_relaxed);
  return ops::select_row(tape, encode_sequence(tape, ids), 0);
}

template <typename T>
Var TransformerEncoder<T>::mlm_logits(Tape<T>& tape, Var hidden_rows) const {
  return ops::add_row(tape, ops::matmul_nt(tape, hidden_rows, tape.param(token_embedding_)), tape.param(*mlm_bias_));
}

// ---------------------------------------------------------------------------
// Masked language modelling

MaskedSequence mask_tokens(std::span<const TokenId> ids, double mask_prob, std::uint64_t seed,
                           std::size_t vocab_size) {
  if (ids.empty() || ids.front() != SubwordVocabulary::kCls) throw DataError("mask_tokens: input must start with [CLS]");
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw ConfigError("mask_tokens: mask_prob must be in [0, 1)");
  Rng rng(seed);
  MaskedSequence out;
  out.ids.assign(ids.begin(), ids.end());
  const std::size_t regular = vocab_size > SubwordVocabulary::kReserved ? vocab_size - SubwordVocabulary::kReserved : 0;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (!rng.bernoulli(mask_prob)) continue;
    out.positions.push_back(i);
    out.targets.push_back(ids[i]);
    const double r = rng.uniform();
    if (r < 0.8 || regular == 0) {
      out.ids[i] = SubwordVocabulary::kMask;
    } else if (r < 0.9) {
      out.ids[i] = static_cast<TokenId>(SubwordVocabulary::kReserved + rng.below(regular));
    }
  }
  return out;
}

template <typename T>
Var mlm_loss(Tape<T>& tape, const TransformerEncoder<T>& encoder, std::span<const MaskedSequence> batch) {
  std::vector<Var> logits;
  std::vector<TokenId> targets;
  for (const MaskedSequence& s : batch) {
    if (s.positions.empty()) continue;
    Var hidden = encoder.encode_sequence(tape, s.ids);
    Var rows = ops::select_rows(tape, hidden, std::span<const std::size_t>(s.positions));
    logits.push_back(encoder.mlm_logits(tape, rows));
    targets.insert(targets.end(), s.targets.begin(), s.targets.end());
  }
  if (targets.empty()) throw DataError("mlm_loss: batch has no masked positions");
  Var all = logits.size() == 1 ? logits.front() : ops::concat_rows(tape, std::span<const Var>(logits));
  return ops::softmax_cross_entropy(tape, all, std::span<const TokenId>(targets));
}

template class CnnEncoder<float>;
template class CnnEncoder<double>;
template class TransformerEncoder<float>;
template class TransformerEncoder<double>;
template Var mlm_loss<float>(Tape<float>&, const TransformerEncoder<float>&, std::span<const MaskedSequence>);
template Var mlm_loss<double>(Tape<double>&, const TransformerEncoder<double>&, std::span<const MaskedSequence>);

}  // namespace dtr
