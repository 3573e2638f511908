// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dtr {

// Indices sorted by descending score; equal scores keep index order.
std::vector<std::size_t> rank_order(std::span<const double> scores);

// Gain 2^label - 1, discount 1 / log2(position + 1) with 1-based positions.
// Returns 0 when the ideal DCG is 0.
double ndcg_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k);
// Reciprocal rank of the first document with label > 0 within the top k, else 0.
double mrr_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k);
// Fraction of (positive, negative) pairs ordered correctly, ties count one
// half. Positives are labels > 0. Throws DataError without both classes.
double auc(std::span<const double> scores, std::span<const double> labels);

struct QueryMetrics {
  std::string query_id;
  std::size_t documents = 0;
  double ndcg = 0.0;
  double mrr = 0.0;
};

struct EvalReport {
  std::size_t k = 10;
  std::size_t queries = 0;
  double ndcg = 0.0;  // mean over queries
  double mrr = 0.0;   // mean over queries
  std::optional<double> auc;  // pooled over all documents; empty if one class only
  std::vector<QueryMetrics> per_query;

  std::string to_csv(bool per_query_rows = false) const;
  std::string to_json() const;
  std::string to_table() const;
};

EvalReport evaluate_rankings(std::span<const std::string> query_ids, std::span<const std::vector<double>> scores,
                             std::span<const std::vector<double>> labels, std::size_t k);

}  // namespace dtr
