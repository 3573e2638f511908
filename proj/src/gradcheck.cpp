// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtr/rng.hpp"

namespace dtr {

template <typename T>
GradCheckReport finite_diff_check(const std::function<Var(Tape<T>&)>& loss,
                                  std::span<Parameter<T>* const> params, const GradCheckOptions& options) {
  for (Parameter<T>* p : params) p->zero_grad();
  {
    Tape<T> tape(true);
    tape.backward(loss(tape));
  }
  std::vector<std::vector<T>> analytic;
  for (Parameter<T>* p : params) {
    analytic.push_back(p->grad.data);
    p->zero_grad();
  }

  std::uint64_t signature = 0;
  auto evaluate = [&] {
    Tape<T> tape(false);
    const auto value = static_cast<double>(tape.scalar(loss(tape)));
    signature = tape.branch_signature();
    return value;
  };
  evaluate();
  const std::uint64_t center = signature;

  Rng rng(options.seed);
  const T eps = static_cast<T>(options.epsilon);
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coordinates_per_tensor) {
      rng.shuffle(coords.begin(), coords.end());
      coords.resize(options.max_coordinates_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    TensorGradCheck check{p.name, coords.size(), 0.0, 0.0, 0.0, 0};
    double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
    for (std::size_t i : coords) {
      const T original = p.value.data[i];
      p.value.data[i] = original + eps;
      const double plus = evaluate();
      const std::uint64_t plus_signature = signature;
      p.value.data[i] = original - eps;
      const double minus = evaluate();
      p.value.data[i] = original;
      if (options.skip_kinks && (plus_signature != center || signature != center)) {
        ++check.skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * static_cast<double>(eps));
      const double a = static_cast<double>(analytic[k][i]);
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      check.max_absolute_error = std::max(check.max_absolute_error, abs_err);
      check.max_relative_error = std::max(check.max_relative_error, abs_err / denom);
      diff_sq += abs_err * abs_err;
      analytic_sq += a * a;
      numeric_sq += numeric * numeric;
    }
    check.norm_relative_error =
        std::sqrt(diff_sq) / std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), options.denominator_floor});
    report.tensors.push_back(std::move(check));
  }
  return report;
}

template GradCheckReport finite_diff_check<float>(const std::function<Var(Tape<float>&)>&,
                                                  std::span<Parameter<float>* const>, const GradCheckOptions&);
template GradCheckReport finite_diff_check<double>(const std::function<Var(Tape<double>&)>&,
                                                   std::span<Parameter<double>* const>, const GradCheckOptions&);

}  // namespace dtr
