// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dtr/tape.hpp"

namespace dtr {

enum class LtrMode { kPointwise, kPairwise, kListwise };

struct LtrConfig {
  LtrMode mode = LtrMode::kListwise;
  bool lambda_rank = false;  // pairwise only

  void validate() const;
  bool operator==(const LtrConfig&) const = default;
};

std::string to_string(LtrMode mode);
LtrMode parse_ltr_mode(const std::string& name);

// Loss value and its gradient with respect to each score.
struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;
  bool no_pairs = false;  // pairwise: no pair with label_i > label_j
};

// Mean binary cross-entropy of sigmoid(score) against the label.
LossValue pointwise_loss(std::span<const double> scores, std::span<const double> labels);
// Mean over pairs with label_i > label_j of log(1 + exp(-(s_i - s_j))),
// each term weighted by |delta NDCG_ij| when lambda_rank is set. Lambda
// weights are treated as constants when differentiating.
LossValue pairwise_loss(std::span<const double> scores, std::span<const double> labels, bool lambda_rank = false);
// Cross-entropy between softmax(scores) and labels / sum(labels).
LossValue listwise_loss(std::span<const double> scores, std::span<const double> labels);
LossValue ranking_loss(std::span<const double> scores, std::span<const double> labels, const LtrConfig& config);

// n x n matrix of |delta NDCG| (full list) from swapping the ranks of i and j
// under the current score order.
std::vector<std::vector<double>> lambda_weights(std::span<const double> scores, std::span<const double> labels);

// True when a query can produce a training signal under `config`.
bool has_training_signal(std::span<const double> labels, const LtrConfig& config);

// Tape node for the loss over a score column (n x 1) or row (1 x n).
template <typename T>
Var ltr_loss(Tape<T>& tape, Var scores, std::span<const double> labels, const LtrConfig& config);

}  // namespace dtr
