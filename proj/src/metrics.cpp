// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dtr/error.hpp"

namespace dtr {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* op) {
  if (a != b)
    throw ShapeError(std::string(op) + ": " + std::to_string(a) + " scores vs " + std::to_string(b) + " labels");
}

double gain(double label) { return std::exp2(label) - 1.0; }
double discount(std::size_t position) { return 1.0 / std::log2(static_cast<double>(position) + 2.0); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<std::size_t> rank_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double ndcg_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  check_lengths(scores.size(), labels.size(), "ndcg_at_k");
  if (k == 0) throw ConfigError("ndcg_at_k: k must be at least 1");
  const auto order = rank_order(scores);
  std::vector<double> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const std::size_t top = std::min(k, labels.size());
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    dcg += gain(labels[order[i]]) * discount(i);
    idcg += gain(ideal[i]) * discount(i);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double mrr_at_k(std::span<const double> scores, std::span<const double> labels, std::size_t k) {
  check_lengths(scores.size(), labels.size(), "mrr_at_k");
  if (k == 0) throw ConfigError("mrr_at_k: k must be at least 1");
  const auto order = rank_order(scores);
  const std::size_t top = std::min(k, labels.size());
  for (std::size_t i = 0; i < top; ++i)
    if (labels[order[i]] > 0.0) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores.size(), labels.size(), "auc");
  // Mann-Whitney U with midranks for ties.
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t m = i; m < j; ++m)
      if (labels[idx[m]] > 0.0) {
        positives += 1.0;
        rank_sum += midrank;
      }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) throw DataError("auc: needs at least one positive and one negative");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

EvalReport evaluate_rankings(std::span<const std::string> query_ids, std::span<const std::vector<double>> scores,
                             std::span<const std::vector<double>> labels, std::size_t k) {
  if (query_ids.size() != scores.size() || scores.size() != labels.size())
    throw ShapeError("evaluate_rankings: inconsistent query counts");
  EvalReport r;
  r.k = k;
  r.queries = scores.size();
  std::vector<double> pooled_scores, pooled_labels;
  for (std::size_t q = 0; q < scores.size(); ++q) {
    QueryMetrics m;
    m.query_id = query_ids[q];
    m.documents = scores[q].size();
    m.ndcg = ndcg_at_k(scores[q], labels[q], k);
    m.mrr = mrr_at_k(scores[q], labels[q], k);
    r.ndcg += m.ndcg;
    r.mrr += m.mrr;
    r.per_query.push_back(std::move(m));
    pooled_scores.insert(pooled_scores.end(), scores[q].begin(), scores[q].end());
    pooled_labels.insert(pooled_labels.end(), labels[q].begin(), labels[q].end());
  }
  if (r.queries > 0) {
    r.ndcg /= static_cast<double>(r.queries);
    r.mrr /= static_cast<double>(r.queries);
  }
  const bool has_pos = std::any_of(pooled_labels.begin(), pooled_labels.end(), [](double l) { return l > 0.0; });
  const bool has_neg = std::any_of(pooled_labels.begin(), pooled_labels.end(), [](double l) { return l <= 0.0; });
  if (has_pos && has_neg) r.auc = auc(pooled_scores, pooled_labels);
  return r;
}

std::string EvalReport::to_csv(bool per_query_rows) const {
  std::ostringstream os;
  const std::string ks = std::to_string(k);
  os << "queries,ndcg@" << ks << ",mrr@" << ks << ",auc\n";
  os << queries << ',' << fmt(ndcg) << ',' << fmt(mrr) << ',' << (auc ? fmt(*auc) : std::string()) << '\n';
  if (per_query_rows) {
    os << "query_id,documents,ndcg@" << ks << ",mrr@" << ks << '\n';
    for (const auto& q : per_query) os << q.query_id << ',' << q.documents << ',' << fmt(q.ndcg) << ',' << fmt(q.mrr) << '\n';
  }
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = k;
  j["queries"] = queries;
  j["ndcg"] = ndcg;
  j["mrr"] = mrr;
  j["auc"] = auc ? nlohmann::ordered_json(*auc) : nlohmann::ordered_json(nullptr);
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  const std::string ks = std::to_string(k);
  os << "metric      value\n";
  os << "queries     " << queries << '\n';
  os << "ndcg@" << ks << std::string(ks.size() < 6 ? 6 - ks.size() : 1, ' ') << ' ' << fmt(ndcg) << '\n';
  os << "mrr@" << ks << std::string(ks.size() < 7 ? 7 - ks.size() : 1, ' ') << ' ' << fmt(mrr) << '\n';
  os << "auc         " << (auc ? fmt(*auc) : std::string("n/a")) << '\n';
  return os.str();
}

}  // namespace dtr
