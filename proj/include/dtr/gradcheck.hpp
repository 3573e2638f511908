// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dtr/tape.hpp"

namespace dtr {

struct TensorGradCheck {
  std::string name;
  std::size_t coordinates = 0;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||, floor) over the
  // compared coordinates of this tensor.
  double norm_relative_error = 0.0;
  // Coordinates whose +-epsilon perturbation changed a branch (see below).
  std::size_t skipped = 0;
};

struct GradCheckReport {
  std::vector<TensorGradCheck> tensors;

  double max_relative_error() const {
    double worst = 0.0;
    for (const auto& t : tensors) worst = std::max(worst, t.max_relative_error);
    return worst;
  }
  double max_norm_relative_error() const {
    double worst = 0.0;
    for (const auto& t : tensors) worst = std::max(worst, t.norm_relative_error);
    return worst;
  }
  std::size_t coordinates() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.coordinates;
    return n;
  }
  std::size_t skipped() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.skipped;
    return n;
  }
};

struct GradCheckOptions {
  double epsilon = 1e-3;
  // Tensors larger than this are checked on a seeded random subset.
  std::size_t max_coordinates_per_tensor = 64;
  // Denominator floor: |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-6;
  std::uint64_t seed = 0;
  // Skip coordinates where x - epsilon, x and x + epsilon do not share one
  // tape branch signature: the loss has a kink (relu, max) inside the
  // interval and a central difference does not estimate the derivative there.
  bool skip_kinks = true;
};

// Compares the tape's analytic gradients of `loss` against central
// differences, coordinate by coordinate. Parameter values are restored and
// gradients zeroed on return.
template <typename T>
GradCheckReport finite_diff_check(const std::function<Var(Tape<T>&)>& loss,
                                  std::span<Parameter<T>* const> params, const GradCheckOptions& options = {});

}  // namespace dtr
