// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtr/encoders.hpp"
#include "dtr/error.hpp"
#include "dtr/gradcheck.hpp"
#include "dtr/synthetic.hpp"
#include "dtr/trainer.hpp"
#include "helpers.hpp"

using namespace dtr;

namespace {

using Rows = std::vector<std::vector<double>>;

struct CnnFixture {
  ParameterStore<double> store;
  Parameter<double>* table;
  std::unique_ptr<CnnEncoder<double>> enc;

  CnnFixture(std::size_t vocab, std::size_t dim, std::size_t filters, std::uint64_t seed) {
    Rng rng(seed);
    table = &store.add("embedding/words", {vocab, dim}, ParamGroup::kOther);
    init::uniform(*table, rng, 0.5);
    for (std::size_t c = 0; c < dim; ++c) table->value(0, c) = 0.0;
    CnnConfig cfg{dim, filters, 3};
    enc = std::make_unique<CnnEncoder<double>>(store, "cnn/f", *table, cfg, rng);
    for (double& b : enc->bias().value.data) b = rng.uniform(-0.2, 0.2);
  }

  std::vector<double> encode(const std::vector<TokenId>& ids) const {
    Tape<double> t(false);
    return t.value(enc->encode(t, ids)).data;
  }

  // Naive sliding-window convolution, relu, max over positions.
  std::vector<double> oracle(std::vector<TokenId> ids) const {
    while (ids.size() < 3) ids.push_back(0);
    const std::size_t d = table->value.cols, f = enc->output_dim();
    std::vector<double> best(f, -1e300);
    for (std::size_t p = 0; p + 3 <= ids.size(); ++p)
      for (std::size_t k = 0; k < f; ++k) {
        double s = enc->bias().value(0, k);
        for (std::size_t w = 0; w < 3; ++w)
          for (std::size_t c = 0; c < d; ++c)
            s += table->value(static_cast<std::size_t>(ids[p + w]), c) * enc->filters().value(w * d + c, k);
        best[k] = std::max(best[k], std::max(0.0, s));
      }
    return best;
  }
};

double gelu_ref(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

std::vector<double> layer_norm_ref(const std::vector<double>& x, const Parameter<double>& g,
                                   const Parameter<double>& b) {
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (x[i] - mean) / std::sqrt(var + kLayerNormEps) * g.value.data[i] + b.value.data[i];
  return out;
}

std::vector<double> affine_ref(const std::vector<double>& x, const Parameter<double>& w, const Parameter<double>& b) {
  std::vector<double> out(w.value.cols);
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = b.value.data[j];
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w.value(i, j);
    out[j] = s;
  }
  return out;
}

// Step-by-step pre-norm transformer evaluation over named tensors.
std::vector<double> transformer_ref(const ParameterStore<double>& store, const TransformerConfig& cfg,
                                    const std::vector<TokenId>& ids) {
  auto P = [&](const std::string& n) -> const Parameter<double>& { return *store.find("bert/" + n); };
  const std::size_t m = ids.size(), h = cfg.hidden, dh = h / cfg.heads;
  Rows x(m, std::vector<double>(h));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < h; ++c)
      x[i][c] = (ids[i] == 0 ? 0.0 : P("token_embedding").value(static_cast<std::size_t>(ids[i]), c)) +
                P("position_embedding").value(i, c);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string L = "layer_" + std::to_string(l) + "/";
    Rows q(m), k(m), v(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto a = layer_norm_ref(x[i], P(L + "ln1_gain"), P(L + "ln1_bias"));
      q[i] = affine_ref(a, P(L + "q_kernel"), P(L + "q_bias"));
      k[i] = affine_ref(a, P(L + "k_kernel"), P(L + "k_bias"));
      v[i] = affine_ref(a, P(L + "v_kernel"), P(L + "v_bias"));
    }
    Rows ctx(m, std::vector<double>(h, 0.0));
    for (std::size_t head = 0; head < cfg.heads; ++head)
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> s(m);
        for (std::size_t j = 0; j < m; ++j) {
          double dot = 0;
          for (std::size_t c = 0; c < dh; ++c) dot += q[i][head * dh + c] * k[j][head * dh + c];
          s[j] = dot / std::sqrt(static_cast<double>(dh));
        }
        const double mx = *std::max_element(s.begin(), s.end());
        double z = 0;
        for (double& e : s) z += (e = std::exp(e - mx));
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t c = 0; c < dh; ++c) ctx[i][head * dh + c] += s[j] / z * v[j][head * dh + c];
      }
    for (std::size_t i = 0; i < m; ++i) {
      const auto o = affine_ref(ctx[i], P(L + "out_kernel"), P(L + "out_bias"));
      for (std::size_t c = 0; c < h; ++c) x[i][c] += o[c];
      auto f = affine_ref(layer_norm_ref(x[i], P(L + "ln2_gain"), P(L + "ln2_bias")), P(L + "ffn_in_kernel"),
                          P(L + "ffn_in_bias"));
      for (double& e : f) e = gelu_ref(e);
      const auto y = affine_ref(f, P(L + "ffn_out_kernel"), P(L + "ffn_out_bias"));
      for (std::size_t c = 0; c < h; ++c) x[i][c] += y[c];
    }
  }
  return layer_norm_ref(x[0], P("final_ln_gain"), P("final_ln_bias"));
}

void randomize(ParameterStore<double>& store, Rng& rng, double scale) {
  for (auto* p : store.all())
    for (double& v : p->value.data) v += rng.uniform(-scale, scale);
}

}  // namespace

TEST_SUITE("encoders") {
  TEST_CASE("cnn: zero weights give a zero embedding") {
    CnnFixture f(10, 4, 5, 1);
    init::fill(f.enc->filters(), 0.0);
    init::fill(f.enc->bias(), 0.0);
    CHECK(f.encode({3, 4, 5, 6}) == std::vector<double>(5, 0.0));
  }

  TEST_CASE("cnn: one window and the sliding-window oracle") {
    CnnFixture f(12, 4, 6, 2);
    CHECK(f.encode({3, 7, 9}) == f.oracle({3, 7, 9}));
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<TokenId> ids(5);
      for (auto& id : ids) id = static_cast<TokenId>(1 + rng.below(11));
      const auto got = f.encode(ids);
      const auto want = f.oracle(ids);
      for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
    }
  }

  TEST_CASE("cnn: short inputs are padded and trailing PAD is ignored") {
    CnnFixture f(12, 4, 6, 4);
    CHECK(f.enc->output_dim() == 6);
    const auto one = f.encode({5});
    const auto want = f.oracle({5});
    for (std::size_t k = 0; k < one.size(); ++k) CHECK(one[k] == doctest::Approx(want[k]).epsilon(1e-12));
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<TokenId> ids(1 + rng.below(7));
      for (auto& id : ids) id = static_cast<TokenId>(1 + rng.below(11));
      const auto base = f.encode(ids);
      auto padded = ids;
      padded.resize(ids.size() + 1 + rng.below(5), WordVocabulary::kPad);
      CHECK(f.encode(padded) == base);
    }
    CHECK_THROWS_AS(f.encode({12}), DataError);
  }

  TEST_CASE("cnn: gradient check") {
    CnnFixture f(8, 3, 4, 6);
    const std::vector<TokenId> ids{1, 5, 2, 7, 3};
    auto params = f.store.all();
    const auto report = finite_diff_check<double>(
        [&](Tape<double>& t) { return ops::sum(t, ops::tanh(t, f.enc->encode(t, ids))); }, params);
    CHECK(report.max_relative_error() < 1e-4);
  }

  TEST_CASE("transformer: shape contract and errors") {
    ParameterStore<float> store;
    Rng rng(1);
    const auto cfg = TransformerConfig::tiny_libert();
    TransformerEncoder<float> enc(store, "bert", cfg, 30, rng);
    CHECK(store.size() == cfg.tensor_count());
    std::size_t numel = 0;
    for (auto* p : store.all()) numel += p->numel();
    CHECK(numel == cfg.parameter_count(30));
    for (std::size_t m : {1u, 2u, 7u, 32u}) {
      std::vector<TokenId> ids(m, 9);
      ids[0] = SubwordVocabulary::kCls;
      Tape<float> t(false);
      const auto& v = t.value(enc.encode(t, ids));
      CHECK(v.rows == 1);
      CHECK(v.cols == cfg.hidden);
    }
    Tape<float> t(false);
    std::vector<TokenId> no_cls{5, 6};
    CHECK_THROWS_AS(enc.encode(t, no_cls), DataError);
    std::vector<TokenId> too_long(33, 5);
    too_long[0] = SubwordVocabulary::kCls;
    CHECK_THROWS_AS(enc.encode(t, too_long), DataError);
    CHECK_THROWS_AS(TransformerConfig({2, 64, 3, 32}).validate(), ConfigError);
  }

  TEST_CASE("transformer: CLS output is permutation invariant without positions") {
    ParameterStore<double> store;
    Rng rng(2);
    TransformerEncoder<double> enc(store, "bert", {2, 8, 2, 16}, 20, rng);
    randomize(store, rng, 0.3);
    init::fill(enc.position_embedding(), 0.0);
    const std::vector<TokenId> ids{SubwordVocabulary::kCls, 5, 9, 11, 4, 17};
    std::vector<TokenId> perm{SubwordVocabulary::kCls, 11, 4, 17, 9, 5};
    Tape<double> t(false);
    const auto a = t.value(enc.encode(t, ids)).data;
    const auto b = t.value(enc.encode(t, perm)).data;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }

  TEST_CASE("transformer: matches a step-by-step reference") {
    for (const TransformerConfig cfg : {TransformerConfig{1, 4, 1, 8}, TransformerConfig{2, 8, 2, 8}}) {
      ParameterStore<double> store;
      Rng rng(3);
      TransformerEncoder<double> enc(store, "bert", cfg, 12, rng);
      randomize(store, rng, 0.2);
      const std::vector<TokenId> ids{SubwordVocabulary::kCls, 6, 0, 11, 4};
      Tape<double> t(false);
      const auto got = t.value(enc.encode(t, ids)).data;
      const auto want = transformer_ref(store, cfg, ids);
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-5);
    }
  }

  TEST_CASE("transformer: gradient check at a tiny config") {
    ParameterStore<double> store;
    Rng rng(4);
    TransformerEncoder<double> enc(store, "bert", {2, 8, 2, 8}, 10, rng);
    randomize(store, rng, 0.2);
    const std::vector<TokenId> ids{SubwordVocabulary::kCls, 4, 7, 9};
    Matrix<double> w(1, 8);
    for (double& v : w.data) v = rng.uniform(-1, 1);
    auto params = store.all();
    GradCheckOptions opt;
    opt.epsilon = 1e-5;
    opt.max_coordinates_per_tensor = 40;
    const auto report = finite_diff_check<double>(
        [&](Tape<double>& t) { return ops::sum(t, ops::mul(t, enc.encode(t, ids), t.constant(w))); }, params, opt);
    // mlm_bias is not reachable from encode(); its gradient is 0 both ways.
    CHECK(report.max_relative_error() < 1e-4);
  }

  TEST_CASE("mask_tokens") {
    std::vector<TokenId> ids(50);
    std::iota(ids.begin(), ids.end(), 10);
    ids[0] = SubwordVocabulary::kCls;
    const auto none = mask_tokens(ids, 0.0, 1, 100);
    CHECK(none.ids == ids);
    CHECK(none.positions.empty());
    CHECK(mask_tokens(ids, 0.3, 7, 100).ids == mask_tokens(ids, 0.3, 7, 100).ids);
    CHECK_THROWS_AS(mask_tokens(std::vector<TokenId>{5, 6}, 0.1, 1, 100), DataError);

    std::size_t selected = 0, total = 0, masked = 0, kept = 0;
    for (std::uint64_t seed = 0; seed < 205; ++seed) {
      const auto m = mask_tokens(ids, 0.15, seed, 100);
      CHECK(m.ids[0] == SubwordVocabulary::kCls);
      selected += m.positions.size();
      total += ids.size() - 1;
      for (std::size_t k = 0; k < m.positions.size(); ++k) {
        const auto pos = m.positions[k];
        CHECK(pos >= 1);
        CHECK(m.targets[k] == ids[pos]);
        masked += m.ids[pos] == SubwordVocabulary::kMask;
        kept += m.ids[pos] == ids[pos];
        CHECK(m.ids[pos] != SubwordVocabulary::kPad);
      }
    }
    CHECK(total >= 10000);
    const double frac = static_cast<double>(selected) / static_cast<double>(total);
    CHECK(std::abs(frac - 0.15) <= 0.01);
    CHECK(std::abs(static_cast<double>(masked) / selected - 0.8) < 0.05);
    CHECK(std::abs(static_cast<double>(kept) / selected - 0.1) < 0.05);
  }

  TEST_CASE("mlm_loss: uniform logits give ln V and the loss is non-negative") {
    ParameterStore<float> store;
    Rng rng(5);
    TransformerEncoder<float> enc(store, "bert", {1, 8, 2, 16}, 40, rng);
    std::vector<TokenId> ids{SubwordVocabulary::kCls, 7, 8, 9, 10};
    MaskedSequence s{ids, {1, 3}, {7, 9}};
    s.ids[1] = SubwordVocabulary::kMask;
    std::vector<MaskedSequence> batch{s};
    {
      Tape<float> t;
      CHECK(t.scalar(mlm_loss(t, enc, std::span<const MaskedSequence>(batch))) >= 0.0f);
    }
    init::fill(enc.token_embedding(), 0.0f);
    Tape<float> t;
    CHECK(t.scalar(mlm_loss(t, enc, std::span<const MaskedSequence>(batch))) == doctest::Approx(std::log(40.0)));
    std::vector<MaskedSequence> empty{MaskedSequence{ids, {}, {}}};
    CHECK_THROWS_AS(mlm_loss(t, enc, std::span<const MaskedSequence>(empty)), DataError);
  }

  TEST_CASE("mlm pretraining decreases the smoothed loss on a toy corpus") {
    auto spec = testing::small_spec();
    const auto corpus = generate_pretraining_corpus(spec, 50, 3);
    const auto vocab = learn_subword_vocab(corpus, 60);
    MlmModel model({1, 32, 2, 16}, vocab, 1);
    PretrainConfig cfg;
    cfg.steps = 200;
    cfg.batch_sentences = 8;
    cfg.lr = 3e-3;
    cfg.seed = 2;
    const auto result = pretrain_mlm(model, corpus, cfg);
    REQUIRE(result.losses.size() == 200);
    const double first = std::accumulate(result.losses.begin(), result.losses.begin() + 10, 0.0) / 10;
    const double last = std::accumulate(result.losses.end() - 10, result.losses.end(), 0.0) / 10;
    CHECK(last < first);
    // Initial predictions are close to uniform.
    CHECK(std::abs(result.losses.front() - std::log(static_cast<double>(vocab.size()))) < 0.5);
  }

  TEST_CASE("pretraining with zero steps leaves the initialization") {
    const auto corpus = generate_pretraining_corpus(testing::small_spec(), 10, 3);
    const auto vocab = learn_subword_vocab(corpus, 20);
    MlmModel a({1, 8, 2, 16}, vocab, 4), b({1, 8, 2, 16}, vocab, 4);
    PretrainConfig cfg;
    cfg.steps = 0;
    CHECK(pretrain_mlm(a, corpus, cfg).losses.empty());
    for (std::size_t i = 0; i < a.store.size(); ++i) CHECK(a.store[i].value.data == b.store[i].value.data);
    CHECK_THROWS_AS(pretrain_mlm(a, std::vector<std::string>{}, cfg), DataError);
  }
}
