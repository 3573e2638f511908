// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/optim.hpp"

#include <cmath>

namespace dtr {

template <typename T>
AdamState<T> make_adam_state(std::span<Parameter<T>* const> params) {
  AdamState<T> s;
  for (const Parameter<T>* p : params) {
    s.first_moment.emplace_back(p->numel(), T(0));
    s.second_moment.emplace_back(p->numel(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state, T learning_rate) {
  if (state.first_moment.size() != params.size())
    throw ShapeError("adam_step: state was built for " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  state.step += 1;
  const T c1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
  const T c2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != p.numel()) throw ShapeError("adam_step: moment shape mismatch for " + p.name);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const T g = p.grad.data[i];
      m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * g * g;
      const T m_hat = m[i] / c1;
      const T v_hat = v[i] / c2;
      p.value.data[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    p.zero_grad();
  }
}

template AdamState<float> make_adam_state<float>(std::span<Parameter<float>* const>);
template AdamState<double> make_adam_state<double>(std::span<Parameter<double>* const>);
template void adam_step<float>(std::span<Parameter<float>* const>, AdamState<float>&, float);
template void adam_step<double>(std::span<Parameter<double>* const>, AdamState<double>&, double);

}  // namespace dtr
