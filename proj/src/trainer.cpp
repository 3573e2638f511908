// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "dtr/error.hpp"
#include "dtr/optim.hpp"

namespace dtr {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train: epochs must be at least 1");
  if (batch_queries == 0) throw ConfigError("train: batch_queries must be at least 1");
  if (!(lr_other >= 0.0) || !(lr_bert >= 0.0) || !std::isfinite(lr_other) || !std::isfinite(lr_bert))
    throw ConfigError("train: learning rates must be finite and non-negative");
  if (eval_k == 0) throw ConfigError("train: eval_k must be at least 1");
  ltr.validate();
}

std::string TrainResult::log_csv() const {
  std::ostringstream os;
  os << "step,epoch,loss,dev_ndcg10\n";
  char buf[64];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    os << r.step << ',' << r.epoch << ',' << buf << ',';
    if (r.dev_ndcg10) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.dev_ndcg10);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

template <typename T>
std::pair<std::vector<Parameter<T>*>, std::vector<Parameter<T>*>> dual_lr_partition(ParameterStore<T>& store) {
  std::pair<std::vector<Parameter<T>*>, std::vector<Parameter<T>*>> out;
  for (Parameter<T>* p : store.trainable()) (p->group == ParamGroup::kBert ? out.first : out.second).push_back(p);
  return out;
}

template std::pair<std::vector<Parameter<float>*>, std::vector<Parameter<float>*>> dual_lr_partition(
    ParameterStore<float>&);
template std::pair<std::vector<Parameter<double>*>, std::vector<Parameter<double>*>> dual_lr_partition(
    ParameterStore<double>&);

namespace {

double dev_ndcg(const Model<float>& model, const std::vector<PreparedExample<float>>& dev, std::size_t k) {
  double total = 0.0;
  for (const auto& ex : dev) total += ndcg_at_k(model.score(ex), ex.labels, k);
  return total / static_cast<double>(dev.size());
}

std::vector<std::vector<float>> snapshot(ParameterStore<float>& store) {
  std::vector<std::vector<float>> out;
  for (Parameter<float>* p : store.all()) out.push_back(p->value.data);
  return out;
}

void restore(ParameterStore<float>& store, const std::vector<std::vector<float>>& values) {
  auto params = store.all();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.data = values[i];
}

}  // namespace

TrainResult train(Model<float>& model, const Dataset& train_set, const Dataset& dev_set, const TrainConfig& config,
                  const std::function<void(const TrainLogRow&)>& on_log) {
  config.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  if (config.fit_features && model.features() != nullptr && model.spec().normalize_features)
    model.features()->set_statistics(fit_standardizer(std::span<const RankingExample>(train_set)));

  std::vector<PreparedExample<float>> train_ex, dev_ex;
  train_ex.reserve(train_set.size());
  for (const auto& ex : train_set) train_ex.push_back(model.prepare(ex));
  for (const auto& ex : dev_set) dev_ex.push_back(model.prepare(ex));

  auto [bert_params, other_params] = dual_lr_partition(model.parameters());
  AdamState<float> bert_state = make_adam_state<float>(bert_params);
  AdamState<float> other_state = make_adam_state<float>(other_params);
  model.parameters().zero_grad();

  TrainResult result;
  result.best_dev_ndcg = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best;
  for (const auto& ex : train_ex)
    if (!has_training_signal(ex.labels, config.ltr)) ++result.skipped_queries;

  auto evaluate_dev = [&](TrainLogRow& row) {
    if (dev_ex.empty()) return;
    row.dev_ndcg10 = dev_ndcg(model, dev_ex, config.eval_k);
    if (*row.dev_ndcg10 > result.best_dev_ndcg) {
      result.best_dev_ndcg = *row.dev_ndcg10;
      result.best_step = row.step;
      best = snapshot(model.parameters());
    }
  };

  Rng rng(config.seed);
  std::vector<std::size_t> order(train_ex.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_queries) {
      const std::size_t end = std::min(order.size(), begin + config.batch_queries);
      std::vector<std::size_t> batch;
      for (std::size_t i = begin; i < end; ++i)
        if (has_training_signal(train_ex[order[i]].labels, config.ltr)) batch.push_back(order[i]);
      if (batch.empty()) continue;
      // Mean per-query loss: each query's tape contributes grad / |batch|,
      // accumulated into the shared gradient buffers before either step.
      const float inv = 1.0f / static_cast<float>(batch.size());
      double loss_sum = 0.0;
      for (std::size_t q : batch) {
        Tape<float> tape;
        Var scores = model.forward(tape, train_ex[q]);
        Var loss = ltr_loss(tape, scores, train_ex[q].labels, config.ltr);
        const double l = tape.scalar(loss);
        if (!std::isfinite(l))
          throw Error("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) +
                      ": non-finite loss on query index " + std::to_string(q));
        loss_sum += l;
        tape.backward(loss, inv);
      }
      adam_step<float>(bert_params, bert_state, static_cast<float>(config.lr_bert));
      adam_step<float>(other_params, other_state, static_cast<float>(config.lr_other));
      ++step;
      TrainLogRow row{step, epoch, loss_sum / static_cast<double>(batch.size()), std::nullopt};
      const bool last_of_epoch = end == order.size();
      if (last_of_epoch || (config.eval_every > 0 && step % config.eval_every == 0)) evaluate_dev(row);
      result.log.push_back(row);
      if (on_log) on_log(row);
    }
  }
  if (!best.empty()) restore(model.parameters(), best);
  if (dev_ex.empty()) result.best_dev_ndcg = 0.0;
  return result;
}

EvalReport evaluate(const Model<float>& model, const Dataset& data, std::size_t k, bool per_query) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> scores, labels;
  for (const auto& ex : data) {
    PreparedExample<float> p = model.prepare(ex);
    ids.push_back(ex.query_id);
    scores.push_back(model.score(p));
    labels.push_back(p.labels);
  }
  EvalReport r = evaluate_rankings(ids, scores, labels, k);
  if (!per_query) r.per_query.clear();
  return r;
}

MlmModel::MlmModel(const TransformerConfig& cfg, SubwordVocabulary v, std::uint64_t seed)
    : config(cfg), vocab(std::move(v)) {
  Rng rng(seed);
  encoder = std::make_unique<TransformerEncoder<float>>(store, "bert", config, vocab.size(), rng);
}

PretrainResult pretrain_mlm(MlmModel& model, std::span<const std::string> corpus, const PretrainConfig& config,
                            const std::function<void(std::size_t, double)>& on_step) {
  if (corpus.empty()) throw DataError("pretrain: empty corpus");
  if (config.batch_sentences == 0) throw ConfigError("pretrain: batch_sentences must be at least 1");
  if (!(config.mask_prob > 0.0 && config.mask_prob < 1.0)) throw ConfigError("pretrain: mask_prob must be in (0, 1)");
  std::vector<std::vector<TokenId>> sentences;
  sentences.reserve(corpus.size());
  for (const auto& s : corpus) sentences.push_back(tokenize_subwords(s, model.vocab, model.config.max_len));

  if (std::none_of(sentences.begin(), sentences.end(), [](const auto& s) { return s.size() > 1; }))
    throw DataError("pretrain: corpus has no maskable tokens");
  auto params = model.store.trainable();
  AdamState<float> state = make_adam_state<float>(params);
  model.store.zero_grad();
  Rng rng(config.seed);
  PretrainResult result;
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<MaskedSequence> batch;
    std::size_t targets = 0;
    for (std::size_t b = 0; b < config.batch_sentences; ++b) {
      const auto& ids = sentences[rng.below(sentences.size())];
      batch.push_back(mask_tokens(ids, config.mask_prob, rng.next(), model.vocab.size()));
      targets += batch.back().positions.size();
    }
    // Guarantee at least one prediction per step.
    while (targets == 0) {
      const auto& ids = sentences[rng.below(sentences.size())];
      batch.push_back(mask_tokens(ids, config.mask_prob, rng.next(), model.vocab.size()));
      targets += batch.back().positions.size();
    }
    Tape<float> tape;
    Var loss = mlm_loss(tape, *model.encoder, std::span<const MaskedSequence>(batch));
    const double l = tape.scalar(loss);
    if (!std::isfinite(l)) throw Error("pretraining diverged at step " + std::to_string(step));
    tape.backward(loss);
    adam_step<float>(params, state, static_cast<float>(config.lr));
    result.losses.push_back(l);
    if (on_step) on_step(step, l);
  }
  return result;
}

}  // namespace dtr
