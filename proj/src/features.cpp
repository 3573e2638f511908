// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/features.hpp"

#include <cmath>

#include "dtr/error.hpp"

namespace dtr {

Standardizer fit_standardizer(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw DataError("fit_standardizer: no documents to fit on");
  const std::size_t f = rows.front().size();
  Standardizer s{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0)};
  for (const auto& r : rows) {
    if (r.size() != f) throw ShapeError("fit_standardizer: feature count mismatch");
    for (std::size_t i = 0; i < f; ++i) s.mean[i] += r[i];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : s.mean) m /= n;
  // Two-pass variance about the mean.
  for (const auto& r : rows)
    for (std::size_t i = 0; i < f; ++i) s.std[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
  for (double& v : s.std) {
    v = std::sqrt(v / n);
    if (v == 0.0) v = 1.0;
  }
  return s;
}

Standardizer fit_standardizer(std::span<const RankingExample> examples) {
  std::vector<std::vector<double>> rows;
  for (const auto& ex : examples)
    for (const auto& d : ex.documents) rows.push_back(d.traditional_features);
  return fit_standardizer(std::span<const std::vector<double>>(rows));
}

std::vector<double> process_features(std::span<const double> x, const Standardizer& stats, std::span<const double> w,
                                     std::span<const double> b) {
  const std::size_t f = x.size();
  if (stats.mean.size() != f || stats.std.size() != f || w.size() != f || b.size() != f)
    throw ShapeError("process_features: length mismatch");
  std::vector<double> out(f);
  for (std::size_t i = 0; i < f; ++i) out[i] = (x[i] - stats.mean[i]) / stats.std[i] * w[i] + b[i];
  return out;
}

template <typename T>
FeatureProcessor<T>::FeatureProcessor(ParameterStore<T>& store, std::size_t num_features, bool normalize, bool rescale)
    : mean_(store.add("features/mean", {num_features}, ParamGroup::kOther, false)),
      std_(store.add("features/std", {num_features}, ParamGroup::kOther, false)),
      scale_(store.add("features/scale", {num_features}, ParamGroup::kOther, rescale)),
      shift_(store.add("features/shift", {num_features}, ParamGroup::kOther, rescale)),
      normalize_(normalize),
      rescale_(rescale) {
  std::fill(std_.value.data.begin(), std_.value.data.end(), T(1));
  std::fill(scale_.value.data.begin(), scale_.value.data.end(), T(1));
}

template <typename T>
void FeatureProcessor<T>::set_statistics(const Standardizer& stats) {
  if (stats.mean.size() != num_features() || stats.std.size() != num_features())
    throw ShapeError("feature statistics length mismatch");
  for (std::size_t i = 0; i < num_features(); ++i) {
    if (!(stats.std[i] > 0.0)) throw DataError("feature std must be positive");
    mean_.value.data[i] = static_cast<T>(stats.mean[i]);
    std_.value.data[i] = static_cast<T>(stats.std[i]);
  }
}

template <typename T>
Standardizer FeatureProcessor<T>::statistics() const {
  Standardizer s;
  for (std::size_t i = 0; i < num_features(); ++i) {
    s.mean.push_back(static_cast<double>(mean_.value.data[i]));
    s.std.push_back(static_cast<double>(std_.value.data[i]));
  }
  return s;
}

template <typename T>
Var FeatureProcessor<T>::apply(Tape<T>& tape, const Matrix<T>& x) const {
  const std::size_t f = num_features();
  if (x.cols != f)
    throw ShapeError("features: expected " + std::to_string(f) + " columns, got " + std::to_string(x.cols));
  Matrix<T> z = x;
  if (normalize_) {
    for (std::size_t r = 0; r < z.rows; ++r)
      for (std::size_t c = 0; c < f; ++c) z(r, c) = (z(r, c) - mean_.value.data[c]) / std_.value.data[c];
  }
  Var v = tape.constant(std::move(z));
  if (!rescale_) return v;
  return ops::add_row(tape, ops::mul_row(tape, v, tape.param(scale_)), tape.param(shift_));
}

template class FeatureProcessor<float>;
template class FeatureProcessor<double>;

}  // namespace dtr
