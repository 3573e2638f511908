// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "dtr/error.hpp"
#include "dtr/trainer.hpp"
#include "helpers.hpp"

using namespace dtr;
using testing::small_model_spec;

namespace {

struct Fixture {
  SyntheticCorpus corpus = generate_synthetic_corpus(testing::small_spec(24, 6), 5);

  std::unique_ptr<Model<float>> model(EncoderKind kind, std::uint64_t seed = 1) const {
    const ModelSpec spec = small_model_spec(kind);
    return std::make_unique<Model<float>>(spec, build_vocabularies(spec, corpus.train), seed);
  }
};

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_queries = 5;
  c.lr_other = 1e-2;
  c.lr_bert = 1e-3;
  c.seed = 3;
  return c;
}

std::vector<std::vector<float>> values(const ParameterStore<float>& store) {
  std::vector<std::vector<float>> out;
  for (std::size_t i = 0; i < store.size(); ++i) out.push_back(store[i].value.data);
  return out;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("dual learning-rate partition") {
    Fixture f;
    auto cnn = f.model(EncoderKind::kCnn);
    auto [cnn_bert, cnn_other] = dual_lr_partition(cnn->parameters());
    CHECK(cnn_bert.empty());
    CHECK(cnn_other.size() == cnn->parameters().trainable().size());

    auto bert = f.model(EncoderKind::kBert);
    auto [b, o] = dual_lr_partition(bert->parameters());
    const auto cfg = bert->spec().transformer;
    CHECK(b.size() == cfg.tensor_count());
    std::set<const Parameter<float>*> seen;
    for (auto* p : b) {
      CHECK(p->name.starts_with("bert/"));
      seen.insert(p);
    }
    for (auto* p : o) {
      CHECK(!p->name.starts_with("bert/"));
      seen.insert(p);
    }
    // Disjoint, and together exactly the trainable set.
    CHECK(seen.size() == b.size() + o.size());
    CHECK(seen.size() == bert->parameters().trainable().size());
  }

  TEST_CASE("zero learning rates leave every parameter unchanged") {
    Fixture f;
    auto model = f.model(EncoderKind::kBert);
    TrainConfig c = quick_config();
    c.lr_other = 0.0;
    c.lr_bert = 0.0;
    c.fit_features = false;
    const auto before = values(model->parameters());
    train(*model, f.corpus.train, f.corpus.dev, c);
    CHECK(values(model->parameters()) == before);
  }

  TEST_CASE("only the bert group moves when lr_other is zero") {
    Fixture f;
    auto model = f.model(EncoderKind::kBert);
    TrainConfig c = quick_config();
    c.lr_other = 0.0;
    c.fit_features = false;
    c.epochs = 1;
    f.corpus.dev.clear();  // no best-dev restore
    const auto before = values(model->parameters());
    train(*model, f.corpus.train, f.corpus.dev, c);
    const auto& store = model->parameters();
    bool bert_moved = false;
    for (std::size_t i = 0; i < store.size(); ++i) {
      if (store[i].name.starts_with("bert/")) bert_moved |= store[i].value.data != before[i];
      else CHECK(store[i].value.data == before[i]);
    }
    CHECK(bert_moved);
  }

  TEST_CASE("same seed gives identical logs and weights") {
    Fixture f;
    auto a = f.model(EncoderKind::kCnn, 9), b = f.model(EncoderKind::kCnn, 9);
    const auto ra = train(*a, f.corpus.train, f.corpus.dev, quick_config());
    const auto rb = train(*b, f.corpus.train, f.corpus.dev, quick_config());
    CHECK(ra.log_csv() == rb.log_csv());
    CHECK(values(a->parameters()) == values(b->parameters()));
    TrainConfig other = quick_config();
    other.seed = 4;
    auto c = f.model(EncoderKind::kCnn, 9);
    CHECK(train(*c, f.corpus.train, f.corpus.dev, other).log_csv() != ra.log_csv());
  }

  TEST_CASE("incomplete last batch is kept and logged") {
    Fixture f;
    auto model = f.model(EncoderKind::kMlp);
    TrainConfig c = quick_config();
    c.batch_queries = 5;  // 24 queries: 4 full batches and one of 4
    c.epochs = 3;
    const auto r = train(*model, f.corpus.train, f.corpus.dev, c);
    REQUIRE(r.log.size() == 15);
    for (std::size_t i = 0; i < r.log.size(); ++i) {
      CHECK(r.log[i].step == i + 1);
      CHECK(r.log[i].epoch == i / 5 + 1);
      // Dev is evaluated at each epoch end only.
      CHECK(r.log[i].dev_ndcg10.has_value() == ((i + 1) % 5 == 0));
    }
    CHECK(r.log_csv().rfind("step,epoch,loss,dev_ndcg10\n", 0) == 0);
  }

  TEST_CASE("the model keeps the best dev checkpoint") {
    Fixture f;
    auto model = f.model(EncoderKind::kCnn, 2);
    TrainConfig c = quick_config();
    c.epochs = 4;
    c.eval_every = 2;
    const auto r = train(*model, f.corpus.train, f.corpus.dev, c);
    double best = -1.0;
    std::size_t best_step = 0;
    for (const auto& row : r.log)
      if (row.dev_ndcg10 && *row.dev_ndcg10 > best) best = *row.dev_ndcg10, best_step = row.step;
    CHECK(r.best_dev_ndcg == best);
    CHECK(r.best_step == best_step);
    CHECK(evaluate(*model, f.corpus.dev).ndcg == doctest::Approx(best).epsilon(1e-12));
  }

  TEST_CASE("training lowers the loss on a learnable task") {
    Fixture f;
    auto model = f.model(EncoderKind::kMlp, 3);
    TrainConfig c = quick_config();
    c.epochs = 20;
    c.lr_other = 3e-2;
    const auto r = train(*model, f.corpus.train, f.corpus.dev, c);
    double first = 0, last = 0;
    for (std::size_t i = 0; i < 5; ++i) first += r.log[i].loss, last += r.log[r.log.size() - 1 - i].loss;
    CHECK(last < first);
  }

  TEST_CASE("errors and skipped queries") {
    Fixture f;
    auto model = f.model(EncoderKind::kMlp);
    CHECK_THROWS_AS(train(*model, Dataset{}, f.corpus.dev, quick_config()), DataError);
    TrainConfig bad = quick_config();
    bad.batch_queries = 0;
    CHECK_THROWS_AS(train(*model, f.corpus.train, f.corpus.dev, bad), ConfigError);
    bad = quick_config();
    bad.lr_other = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    Dataset data = f.corpus.train;
    for (auto& d : data[0].documents) d.label = 0.0;
    TrainConfig listwise = quick_config();
    listwise.ltr.mode = LtrMode::kListwise;
    CHECK(train(*model, data, f.corpus.dev, listwise).skipped_queries == 1);
  }

  TEST_CASE("evaluate reports per-query rows on request") {
    Fixture f;
    auto model = f.model(EncoderKind::kMlp);
    CHECK(evaluate(*model, f.corpus.dev).per_query.empty());
    const auto r = evaluate(*model, f.corpus.dev, 5, true);
    CHECK(r.per_query.size() == f.corpus.dev.size());
    CHECK(r.k == 5);
  }
}
