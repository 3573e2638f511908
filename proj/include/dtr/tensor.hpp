// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtr/error.hpp"

namespace dtr {

// Dense row-major matrix. Vectors are 1 x n.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix row_vector(std::vector<T> values) {
    Matrix m;
    m.rows = 1;
    m.cols = values.size();
    m.data = std::move(values);
    return m;
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

enum class ParamGroup { kBert, kOther };

// Named trainable (or frozen) tensor. Values are held as a 2-D matrix: rank-1
// shapes {n} become 1 x n, rank-2 shapes {r, c} become r x c.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  Matrix<T> value;
  Matrix<T> grad;
  bool trainable = true;
  ParamGroup group = ParamGroup::kOther;

  std::size_t numel() const { return value.size(); }
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

// Owns parameters at stable addresses so encoders can keep references.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter<T>& add(std::string name, std::vector<std::size_t> shape, ParamGroup group,
                    bool trainable = true) {
    if (shape.empty() || shape.size() > 2) throw ShapeError("parameter rank must be 1 or 2: " + name);
    for (std::size_t d : shape)
      if (d == 0) throw ShapeError("parameter dimensions must be positive: " + name);
    if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = std::move(name);
    p->shape = shape;
    const std::size_t rows = shape.size() == 1 ? 1 : shape[0];
    const std::size_t cols = shape.size() == 1 ? shape[0] : shape[1];
    p->value = Matrix<T>(rows, cols);
    p->grad = Matrix<T>(rows, cols);
    p->trainable = trainable;
    p->group = group;
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(std::string_view name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }
  const Parameter<T>* find(std::string_view name) const {
    for (const auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::vector<Parameter<T>*> all() {
    std::vector<Parameter<T>*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<Parameter<T>*> trainable() {
    std::vector<Parameter<T>*> out;
    for (auto& p : params_)
      if (p->trainable) out.push_back(p.get());
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

}  // namespace dtr
