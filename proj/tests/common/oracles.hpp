// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations shared by the unit and acceptance
// suites. They deliberately avoid the library's ranking helpers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace dtr::oracle {

// Document indices best first: explicit selection sort on (score desc, index asc).
inline std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> left(scores.size());
  std::iota(left.begin(), left.end(), std::size_t{0});
  std::vector<std::size_t> out;
  while (!left.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < left.size(); ++i)
      if (scores[left[i]] > scores[left[best]]) best = i;
    out.push_back(left[best]);
    left.erase(left.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

inline double dcg(const std::vector<double>& ordered_labels, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(k, ordered_labels.size()); ++i)
    s += (std::pow(2.0, ordered_labels[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

inline double ndcg(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  std::vector<double> got;
  for (std::size_t i : ranking(scores)) got.push_back(labels[i]);
  std::vector<double> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), [](double a, double b) { return a > b; });
  const double best = dcg(ideal, k);
  return best == 0.0 ? 0.0 : dcg(got, k) / best;
}

inline double mrr(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  const auto r = ranking(scores);
  for (std::size_t i = 0; i < r.size() && i < k; ++i)
    if (labels[r[i]] > 0.0) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

// O(n^2) pair enumeration; ties count one half.
inline double auc(std::span<const double> scores, std::span<const double> labels) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (!(labels[i] > 0.0) || labels[j] > 0.0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) good += 1.0;
      else if (scores[i] == scores[j]) good += 0.5;
    }
  return good / pairs;
}

// |NDCG(after swapping the ranks of i and j) - NDCG(before)| over the full list.
inline std::vector<std::vector<double>> lambda_weights(std::span<const double> scores, std::span<const double> labels) {
  const std::size_t n = scores.size();
  const auto base_rank = ranking(scores);
  std::vector<double> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), [](double a, double b) { return a > b; });
  const double best = dcg(ideal, n);
  auto ndcg_of = [&](const std::vector<std::size_t>& r) {
    std::vector<double> l;
    for (std::size_t i : r) l.push_back(labels[i]);
    return best == 0.0 ? 0.0 : dcg(l, n) / best;
  };
  const double base = ndcg_of(base_rank);
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      auto swapped = base_rank;
      std::iter_swap(std::find(swapped.begin(), swapped.end(), i), std::find(swapped.begin(), swapped.end(), j));
      w[i][j] = std::abs(ndcg_of(swapped) - base);
    }
  return w;
}

}  // namespace dtr::oracle
