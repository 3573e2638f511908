// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtr/error.hpp"
#include "dtr/gradcheck.hpp"
#include "dtr/ltr.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dtr;

namespace {

double numeric_grad(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x, std::size_t i) {
  const double h = 1e-6;
  x[i] += h;
  const double up = f(x);
  x[i] -= 2 * h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

const LtrConfig kConfigs[] = {{LtrMode::kPointwise, false},
                              {LtrMode::kPairwise, false},
                              {LtrMode::kPairwise, true},
                              {LtrMode::kListwise, false}};

}  // namespace

TEST_SUITE("ltr") {
  TEST_CASE("pointwise examples") {
    const std::vector<double> half{0.5, 0.5, 0.5};
    CHECK(pointwise_loss(std::vector<double>{0, 0, 0}, half).loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(pointwise_loss(std::vector<double>{50.0}, std::vector<double>{1.0}).loss < 1e-20);
    CHECK(pointwise_loss(std::vector<double>{1, -1}, std::vector<double>{1, 0}).loss ==
          doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-15));
    CHECK(std::log1p(std::exp(-1.0)) == doctest::Approx(0.3133).epsilon(1e-4));
  }

  TEST_CASE("pairwise examples") {
    CHECK(pairwise_loss(std::vector<double>{0.3, 0.3}, std::vector<double>{1, 0}).loss ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(pairwise_loss(std::vector<double>{60.0, 0.0}, std::vector<double>{1, 0}).loss < 1e-20);
    const auto none = pairwise_loss(std::vector<double>{1.0, 2.0}, std::vector<double>{1, 1});
    CHECK(none.no_pairs);
    CHECK(none.loss == 0.0);
    CHECK(none.grad == std::vector<double>{0.0, 0.0});
    // Three pairs for labels [1, 0.5, 0]: mean of the three logistic terms.
    const std::vector<double> s{0.2, -0.4, 0.9}, l{1.0, 0.5, 0.0};
    const double want = (std::log1p(std::exp(-(0.2 + 0.4))) + std::log1p(std::exp(-(0.2 - 0.9))) +
                         std::log1p(std::exp(-(-0.4 - 0.9)))) / 3.0;
    CHECK(pairwise_loss(s, l).loss == doctest::Approx(want).epsilon(1e-14));
  }

  TEST_CASE("listwise examples") {
    for (std::size_t n : {2u, 5u, 10u, 37u}) {
      std::vector<double> scores(n, 1.25), labels(n, 0.0);
      labels[n / 2] = 1.0;
      CHECK(std::abs(listwise_loss(scores, labels).loss - std::log(static_cast<double>(n))) < 1e-6);
    }
    CHECK(listwise_loss(std::vector<double>{80, 0, 0}, std::vector<double>{1, 0, 0}).loss < 1e-30);
    const double e2 = std::exp(2.0), e1 = std::exp(1.0);
    CHECK(listwise_loss(std::vector<double>{2, 1, 0}, std::vector<double>{1, 0, 0}).loss ==
          doctest::Approx(-std::log(e2 / (e2 + e1 + 1.0))).epsilon(1e-14));
    CHECK(-std::log(e2 / (e2 + e1 + 1.0)) == doctest::Approx(0.4076).epsilon(1e-4));
    CHECK_THROWS_AS(listwise_loss(std::vector<double>{1, 2}, std::vector<double>{0, 0}), DataError);
    // Multi-click labels are normalized to a distribution.
    const auto two = listwise_loss(std::vector<double>{0, 0, 0, 0}, std::vector<double>{1, 1, 0, 0});
    CHECK(two.loss == doctest::Approx(std::log(4.0)));
  }

  TEST_CASE("length mismatch and empty lists") {
    CHECK_THROWS_AS(pointwise_loss(std::vector<double>{1}, std::vector<double>{1, 0}), ShapeError);
    CHECK_THROWS_AS(listwise_loss(std::vector<double>{}, std::vector<double>{}), DataError);
  }

  TEST_CASE("lambda weights equal the swap-enumeration oracle on all binary lists of 3-5 docs") {
    Rng rng(1);
    for (std::size_t n = 3; n <= 5; ++n)
      for (std::size_t mask = 0; mask < (1u << n); ++mask)
        for (int trial = 0; trial < 5; ++trial) {
          std::vector<double> labels(n);
          for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1u;
          auto scores = testing::random_vector(rng, n);
          if (trial == 4) std::fill(scores.begin(), scores.end(), 0.0);  // all tied
          const auto got = lambda_weights(scores, labels);
          const auto want = oracle::lambda_weights(scores, labels);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              CHECK(std::abs(got[i][j] - want[i][j]) < 1e-12);
              CHECK(got[i][j] == got[j][i]);
              if (labels[i] == labels[j]) CHECK(got[i][j] == 0.0);
            }
        }
  }

  TEST_CASE("losses are invariant to reordering documents") {
    Rng rng(2);
    for (const auto& cfg : kConfigs)
      for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.below(8);
        auto s = testing::random_vector(rng, n, -3, 3);
        auto l = testing::random_binary_labels(rng, n);
        l[0] = 1.0;
        l[1] = 0.0;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm.begin(), perm.end());
        std::vector<double> ps(n), pl(n);
        for (std::size_t i = 0; i < n; ++i) ps[i] = s[perm[i]], pl[i] = l[perm[i]];
        CHECK(ranking_loss(ps, pl, cfg).loss == doctest::Approx(ranking_loss(s, l, cfg).loss).epsilon(1e-12));
      }
  }

  TEST_CASE("shift invariance: pairwise and listwise yes, pointwise no") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 3 + rng.below(6);
      auto s = testing::random_vector(rng, n, -2, 2);
      auto l = testing::random_binary_labels(rng, n);
      l[0] = 1.0;
      l[1] = 0.0;
      const double c = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(1.0, 5.0);
      auto shifted = s;
      for (double& x : shifted) x += c;
      for (const auto& cfg : kConfigs) {
        const double a = ranking_loss(s, l, cfg).loss, b = ranking_loss(shifted, l, cfg).loss;
        if (cfg.mode == LtrMode::kPointwise) CHECK(std::abs(a - b) > 1e-5);
        else CHECK(std::abs(a - b) <= 1e-5);
      }
    }
  }

  TEST_CASE("analytic gradients match finite differences") {
    Rng rng(4);
    for (const auto& cfg : kConfigs)
      for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(8);
        auto s = testing::random_vector(rng, n, -2, 2);
        std::vector<double> l(n);
        for (double& x : l) x = static_cast<double>(rng.below(3)) / 2.0;
        l[0] = 1.0;
        l[1] = 0.0;
        const auto lv = ranking_loss(s, l, cfg);
        auto f = [&](const std::vector<double>& x) { return ranking_loss(x, l, cfg).loss; };
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(lv.grad[i] - numeric_grad(f, s, i)) < 1e-7);
      }
  }

  TEST_CASE("tape node gradients pass the finite-difference check") {
    Rng rng(5);
    ParameterStore<double> store;
    auto& w = store.add("w", {3, 1}, ParamGroup::kOther);
    for (double& v : w.value.data) v = rng.uniform(-1, 1);
    Matrix<double> x(6, 3);
    for (double& v : x.data) v = rng.uniform(-1, 1);
    const std::vector<double> labels{0, 1, 0, 0.5, 0, 1};
    std::vector<Parameter<double>*> params{&w};
    for (const auto& cfg : kConfigs) {
      const auto report = finite_diff_check<double>(
          [&](Tape<double>& t) { return ltr_loss(t, ops::matmul(t, t.constant(x), t.param(w)), labels, cfg); },
          params, GradCheckOptions{1e-5});
      CHECK(report.max_relative_error() < 1e-6);
    }
  }

  TEST_CASE("config rules") {
    CHECK_THROWS_AS(LtrConfig({LtrMode::kListwise, true}).validate(), ConfigError);
    CHECK_NOTHROW(LtrConfig({LtrMode::kPairwise, true}).validate());
    for (auto m : {LtrMode::kPointwise, LtrMode::kPairwise, LtrMode::kListwise})
      CHECK(parse_ltr_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_ltr_mode("lambdamart"), ConfigError);
    const std::vector<double> zeros{0, 0}, mixed{0, 1};
    CHECK(has_training_signal(zeros, {LtrMode::kPointwise, false}));
    CHECK(!has_training_signal(zeros, {LtrMode::kListwise, false}));
    CHECK(!has_training_signal(zeros, {LtrMode::kPairwise, false}));
    CHECK(has_training_signal(mixed, {LtrMode::kPairwise, true}));
  }
}
