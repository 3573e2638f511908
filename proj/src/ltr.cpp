// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/ltr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "dtr/error.hpp"
#include "dtr/kernels.hpp"
#include "dtr/metrics.hpp"

namespace dtr {

void LtrConfig::validate() const {
  if (lambda_rank && mode != LtrMode::kPairwise) throw ConfigError("ltr: lambda_rank requires pairwise mode");
}

std::string to_string(LtrMode mode) {
  switch (mode) {
    case LtrMode::kPointwise: return "pointwise";
    case LtrMode::kPairwise: return "pairwise";
    case LtrMode::kListwise: return "listwise";
  }
  return "?";
}

LtrMode parse_ltr_mode(const std::string& name) {
  if (name == "pointwise") return LtrMode::kPointwise;
  if (name == "pairwise") return LtrMode::kPairwise;
  if (name == "listwise") return LtrMode::kListwise;
  throw ConfigError("ltr: unknown mode '" + name + "'");
}

namespace {
void check(std::span<const double> scores, std::span<const double> labels, const char* op) {
  if (scores.size() != labels.size())
    throw ShapeError(std::string(op) + ": " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  if (scores.empty()) throw DataError(std::string(op) + ": empty document list");
}
}  // namespace

LossValue pointwise_loss(std::span<const double> scores, std::span<const double> labels) {
  check(scores, labels, "pointwise_loss");
  const double n = static_cast<double>(scores.size());
  LossValue out;
  out.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i], y = labels[i];
    // y * softplus(-s) + (1 - y) * softplus(s)
    out.loss += y * kernels::softplus(-s) + (1.0 - y) * kernels::softplus(s);
    out.grad[i] = (kernels::sigmoid(s) - y) / n;
  }
  out.loss /= n;
  return out;
}

std::vector<std::vector<double>> lambda_weights(std::span<const double> scores, std::span<const double> labels) {
  check(scores, labels, "lambda_weights");
  const std::size_t n = scores.size();
  const auto order = rank_order(scores);
  std::vector<std::size_t> position(n);
  for (std::size_t r = 0; r < n; ++r) position[order[r]] = r;
  std::vector<double> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  auto gain = [](double l) { return std::exp2(l) - 1.0; };
  auto disc = [](std::size_t r) { return 1.0 / std::log2(static_cast<double>(r) + 2.0); };
  double idcg = 0.0;
  for (std::size_t r = 0; r < n; ++r) idcg += gain(ideal[r]) * disc(r);
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  if (idcg <= 0.0) return w;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      w[i][j] = std::abs((gain(labels[i]) - gain(labels[j])) * (disc(position[i]) - disc(position[j]))) / idcg;
  return w;
}

LossValue pairwise_loss(std::span<const double> scores, std::span<const double> labels, bool lambda_rank) {
  check(scores, labels, "pairwise_loss");
  const std::size_t n = scores.size();
  std::vector<std::vector<double>> w;
  if (lambda_rank) w = lambda_weights(scores, labels);
  LossValue out;
  out.grad.assign(n, 0.0);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!(labels[i] > labels[j])) continue;
      ++pairs;
      const double weight = lambda_rank ? w[i][j] : 1.0;
      const double diff = scores[i] - scores[j];
      out.loss += weight * kernels::softplus(-diff);
      const double g = -weight * kernels::sigmoid(-diff);
      out.grad[i] += g;
      out.grad[j] -= g;
    }
  if (pairs == 0) {
    out.no_pairs = true;
    return out;
  }
  const double inv = 1.0 / static_cast<double>(pairs);
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

LossValue listwise_loss(std::span<const double> scores, std::span<const double> labels) {
  check(scores, labels, "listwise_loss");
  double total = 0.0;
  for (double l : labels) total += l;
  if (!(total > 0.0)) throw DataError("listwise_loss: labels sum to zero");
  const double lse = kernels::logsumexp(scores);
  LossValue out;
  out.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = labels[i] / total;
    out.loss -= p * (scores[i] - lse);
    out.grad[i] = std::exp(scores[i] - lse) - p;
  }
  return out;
}

LossValue ranking_loss(std::span<const double> scores, std::span<const double> labels, const LtrConfig& config) {
  config.validate();
  switch (config.mode) {
    case LtrMode::kPointwise: return pointwise_loss(scores, labels);
    case LtrMode::kPairwise: return pairwise_loss(scores, labels, config.lambda_rank);
    case LtrMode::kListwise: return listwise_loss(scores, labels);
  }
  throw ConfigError("ltr: unknown mode");
}

bool has_training_signal(std::span<const double> labels, const LtrConfig& config) {
  if (labels.empty()) return false;
  switch (config.mode) {
    case LtrMode::kPointwise: return true;
    case LtrMode::kListwise: {
      double total = 0.0;
      for (double l : labels) total += l;
      return total > 0.0;
    }
    case LtrMode::kPairwise:
      for (double a : labels)
        for (double b : labels)
          if (a > b) return true;
      return false;
  }
  return false;
}

template <typename T>
Var ltr_loss(Tape<T>& tape, Var scores, std::span<const double> labels, const LtrConfig& config) {
  const Matrix<T>& S = tape.value(scores);
  if (S.rows != 1 && S.cols != 1) throw ShapeError("ltr_loss: scores must be a row or a column");
  std::vector<double> s(S.data.begin(), S.data.end());
  LossValue lv = ranking_loss(s, labels, config);
  Var o = tape.push(Matrix<T>(1, 1, static_cast<T>(lv.loss)), {scores});
  if (tape.needs_grad(o))
    tape.on_backward(o, [&tape, scores, o, grad = std::move(lv.grad)] {
      const T g = tape.grad(o).data[0];
      Matrix<T>& G = tape.grad(scores);
      for (std::size_t i = 0; i < grad.size(); ++i) G.data[i] += g * static_cast<T>(grad[i]);
    });
  return o;
}

template Var ltr_loss<float>(Tape<float>&, Var, std::span<const double>, const LtrConfig&);
template Var ltr_loss<double>(Tape<double>&, Var, std::span<const double>, const LtrConfig&);

}  // namespace dtr
