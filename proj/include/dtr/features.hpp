// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "dtr/dataset.hpp"
#include "dtr/tape.hpp"

namespace dtr {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;  // population std, zeros replaced by 1
};

// Per-feature statistics over every document of every example.
Standardizer fit_standardizer(std::span<const RankingExample> examples);
Standardizer fit_standardizer(std::span<const std::vector<double>> rows);

// ((x - mean) / std) * w + b over plain values.
std::vector<double> process_features(std::span<const double> x, const Standardizer& stats, std::span<const double> w,
                                     std::span<const double> b);

// Trainable traditional-feature processing. mean/std are frozen tensors so
// they travel with the checkpoint; scale/shift are learned.
template <typename T>
class FeatureProcessor {
 public:
  FeatureProcessor(ParameterStore<T>& store, std::size_t num_features, bool normalize, bool rescale);

  void set_statistics(const Standardizer& stats);
  Standardizer statistics() const;

  // x is (n, F) raw features; returns (n, F) processed features.
  Var apply(Tape<T>& tape, const Matrix<T>& x) const;

  std::size_t num_features() const { return mean_.value.cols; }
  bool normalize() const { return normalize_; }
  bool rescale() const { return rescale_; }
  Parameter<T>& scale() const { return scale_; }
  Parameter<T>& shift() const { return shift_; }

 private:
  Parameter<T>& mean_;
  Parameter<T>& std_;
  Parameter<T>& scale_;
  Parameter<T>& shift_;
  bool normalize_;
  bool rescale_;
};

}  // namespace dtr
