// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dtr/tensor.hpp"

namespace dtr {

// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

// Reverse-mode autodiff tape. Every op appends one node; backward() walks the
// nodes in reverse. Parameter leaves alias the parameter's value and write
// their gradients straight into Parameter::grad, so repeated backward calls
// accumulate until the optimizer zeroes them.
//
// A tape built with record=false computes values only (inference).
template <typename T>
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix<T> value);
  // The same parameter always maps to the same leaf within one tape.
  Var param(Parameter<T>& p);

  const Matrix<T>& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.ref != nullptr ? *n.ref : n.owned;
  }
  T scalar(Var v) const { return value(v).data.at(0); }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, allocated (zeroed) on first use.
  Matrix<T>& grad(Var v);

  // Appends an op output. needs_grad is derived from the inputs.
  Var push(Matrix<T> value, std::initializer_list<Var> inputs);
  Var push(Matrix<T> value, std::span<const Var> inputs);
  void on_backward(Var v, std::function<void()> fn) { nodes_[v.id].backward = std::move(fn); }

  // Seeds d(loss)/d(loss) = scale and propagates to every reachable leaf.
  void backward(Var loss, T scale = T(1));

  // Hash of the branches taken by piecewise ops (relu signs, max positions,
  // zero-norm cosine). Two evaluations with equal signatures lie on the same
  // smooth piece.
  std::uint64_t branch_signature() const { return branches_; }
  void mix_branch(std::uint64_t v) { branches_ = (branches_ ^ v) * 0x100000001b3ULL; }

 private:
  struct Node {
    Matrix<T> owned;
    const Matrix<T>* ref = nullptr;
    Matrix<T> grad_owned;
    Matrix<T>* grad_ref = nullptr;
    bool needs_grad = false;
    std::function<void()> backward;
  };

  bool record_;
  std::uint64_t branches_ = 0xcbf29ce484222325ULL;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> leaves_;
};

// Differentiable ops. Shapes are checked and mismatches raise ShapeError.
namespace ops {

template <typename T> Var matmul(Tape<T>& t, Var a, Var b);     // (n,k)(k,m)
template <typename T> Var matmul_nt(Tape<T>& t, Var a, Var b);  // (n,k)(m,k)^T
// x (n,in) times kernel (in,out) plus bias (1,out) broadcast over rows.
template <typename T> Var linear(Tape<T>& t, Var x, Var kernel, Var bias);
template <typename T> Var add(Tape<T>& t, Var a, Var b);
template <typename T> Var mul(Tape<T>& t, Var a, Var b);
// Adds a 1 x c row to every row of a.
template <typename T> Var add_row(Tape<T>& t, Var a, Var row);
// Multiplies every row of a elementwise by a 1 x c row.
template <typename T> Var mul_row(Tape<T>& t, Var a, Var row);
template <typename T> Var scale(Tape<T>& t, Var a, T s);
template <typename T> Var relu(Tape<T>& t, Var a);
template <typename T> Var tanh(Tape<T>& t, Var a);
template <typename T> Var gelu(Tape<T>& t, Var a);
template <typename T> Var softmax_rows(Tape<T>& t, Var a);
template <typename T> Var layer_norm(Tape<T>& t, Var x, Var gain, Var bias, T eps);
// Gathers rows of an embedding table (V,d). PAD rows are zero and get no grad.
template <typename T> Var embed(Tape<T>& t, Var table, std::span<const std::int32_t> ids, std::int32_t pad_id);
// Sliding windows of `width` consecutive rows, each flattened: (m,d) -> (m-width+1, width*d).
template <typename T> Var unfold(Tape<T>& t, Var x, std::size_t width);
template <typename T> Var max_rows(Tape<T>& t, Var x);  // (n,c) -> (1,c)
template <typename T> Var select_row(Tape<T>& t, Var x, std::size_t r);
template <typename T> Var select_rows(Tape<T>& t, Var x, std::span<const std::size_t> rows);
template <typename T> Var slice_cols(Tape<T>& t, Var x, std::size_t begin, std::size_t count);
template <typename T> Var concat_cols(Tape<T>& t, std::span<const Var> parts);
template <typename T> Var concat_rows(Tape<T>& t, std::span<const Var> parts);
// Cosine similarity of two 1 x d rows; 0 when either norm is 0.
template <typename T> Var cosine(Tape<T>& t, Var u, Var v);
template <typename T> Var sum(Tape<T>& t, Var a);
template <typename T> Var mean(Tape<T>& t, Var a);
// Mean cross-entropy of row-wise softmax(logits) against target class ids.
template <typename T> Var softmax_cross_entropy(Tape<T>& t, Var logits, std::span<const std::int32_t> targets);

}  // namespace ops
}  // namespace dtr
