// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtr/ltr.hpp"
#include "dtr/metrics.hpp"
#include "dtr/model.hpp"

namespace dtr {

struct TrainConfig {
  std::size_t epochs = 2;
  std::size_t batch_queries = 256;
  double lr_other = 1e-3;
  double lr_bert = 1e-5;
  LtrConfig ltr;
  std::uint64_t seed = 0;
  // Evaluate dev NDCG every this many steps (0: only at epoch ends).
  std::size_t eval_every = 0;
  std::size_t eval_k = 10;
  // Fit the feature standardizer on the training set before the first step.
  bool fit_features = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainLogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> dev_ndcg10;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  double best_dev_ndcg = 0.0;
  std::size_t best_step = 0;
  std::size_t skipped_queries = 0;  // queries without a usable label signal

  std::string log_csv() const;
};

// Trainable tensors split by optimizer group: (BERT group, OTHER group).
template <typename T>
std::pair<std::vector<Parameter<T>*>, std::vector<Parameter<T>*>> dual_lr_partition(ParameterStore<T>& store);

// Minibatch training with one Adam state per group. The model is left
// holding the parameters of the best dev evaluation.
TrainResult train(Model<float>& model, const Dataset& train_set, const Dataset& dev_set, const TrainConfig& config,
                  const std::function<void(const TrainLogRow&)>& on_log = {});

EvalReport evaluate(const Model<float>& model, const Dataset& data, std::size_t k = 10, bool per_query = false);

struct PretrainConfig {
  std::size_t steps = 300;
  std::size_t batch_sentences = 16;
  double lr = 1e-3;
  double mask_prob = 0.15;
  std::uint64_t seed = 0;
};

// A standalone transformer with the ranking model's tensor names, so its
// weights can be copied into a Model by name.
struct MlmModel {
  MlmModel(const TransformerConfig& config, SubwordVocabulary vocab, std::uint64_t seed);
  TransformerConfig config;
  SubwordVocabulary vocab;
  ParameterStore<float> store;
  std::unique_ptr<TransformerEncoder<float>> encoder;
};

struct PretrainResult {
  std::vector<double> losses;  // one per step
};

PretrainResult pretrain_mlm(MlmModel& model, std::span<const std::string> corpus, const PretrainConfig& config,
                            const std::function<void(std::size_t, double)>& on_step = {});

}  // namespace dtr
