// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>

// Scalar building blocks shared by the tape ops and the plain-value paths.
// Every reduction has a fixed summation order so results depend only on the
// operands, never on how many rows are processed together.
namespace dtr::kernels {

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// y += alpha * x
template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
inline T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
inline T gelu_derivative(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
  return cdf + x * pdf;
}

template <typename T>
inline T logsumexp(std::span<const T> x) {
  if (x.empty()) return -std::numeric_limits<T>::infinity();
  const T mx = *std::max_element(x.begin(), x.end());
  T s = 0;
  for (T v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

template <typename T>
inline void softmax_inplace(std::span<T> x) {
  if (x.empty()) return;
  const T mx = *std::max_element(x.begin(), x.end());
  T s = 0;
  for (T& v : x) {
    v = std::exp(v - mx);
    s += v;
  }
  for (T& v : x) v /= s;
}

// log(1 + exp(x)) without overflow.
template <typename T>
inline T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
inline T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace dtr::kernels
