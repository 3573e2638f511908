// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtr/tensor.hpp"

namespace dtr {

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::int64_t step = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

// Zero-initialized moments shaped like `params`.
template <typename T>
AdamState<T> make_adam_state(std::span<Parameter<T>* const> params);

// One bias-corrected Adam update over `params`, then zeroes their gradients.
// The state must have been created for the same parameter list.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state, T learning_rate);

}  // namespace dtr
