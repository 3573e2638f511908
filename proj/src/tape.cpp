// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dtr/kernels.hpp"

namespace dtr {

template <typename T>
Var Tape<T>::constant(Matrix<T> value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::param(Parameter<T>& p) {
  if (auto it = leaves_.find(&p); it != leaves_.end()) return Var{it->second};
  Node n;
  n.ref = &p.value;
  n.needs_grad = record_ && p.trainable;
  n.grad_ref = n.needs_grad ? &p.grad : nullptr;
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  leaves_.emplace(&p, id);
  return Var{id};
}

template <typename T>
Matrix<T>& Tape<T>::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad_ref != nullptr) return *n.grad_ref;
  const Matrix<T>& val = n.ref != nullptr ? *n.ref : n.owned;
  if (!n.grad_owned.same_shape(val) || n.grad_owned.data.size() != val.data.size())
    n.grad_owned = Matrix<T>(val.rows, val.cols);
  return n.grad_owned;
}

template <typename T>
Var Tape<T>::push(Matrix<T> value, std::initializer_list<Var> inputs) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()));
}

template <typename T>
Var Tape<T>::push(Matrix<T> value, std::span<const Var> inputs) {
  Node n;
  n.owned = std::move(value);
  if (record_)
    for (Var in : inputs)
      if (nodes_[in.id].needs_grad) {
        n.needs_grad = true;
        break;
      }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
void Tape<T>::backward(Var loss, T scale) {
  if (!record_) throw Error("backward() on a tape that does not record");
  if (loss.id >= nodes_.size()) throw Error("backward() on an unknown value");
  if (value(loss).size() != 1) throw ShapeError("backward() needs a scalar loss");
  if (!nodes_[loss.id].needs_grad) throw Error("backward(): no recorded computation reaches a trainable parameter");
  for (Node& n : nodes_)
    if (n.grad_ref == nullptr) std::fill(n.grad_owned.data.begin(), n.grad_owned.data.end(), T(0));
  grad(loss).data[0] += scale;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward) continue;
    if (n.grad_owned.data.empty()) continue;
    n.backward();
  }
}

template class Tape<float>;
template class Tape<double>;

namespace ops {
namespace {

template <typename T>
void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

template <typename T>
std::string dims(const Matrix<T>& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  const Matrix<T>& A = t.value(a);
  const Matrix<T>& B = t.value(b);
  require<T>(A.cols == B.rows, "matmul", dims(A) + " by " + dims(B));
  Matrix<T> out(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t p = 0; p < A.cols; ++p) kernels::axpy(A(i, p), B.row(p).data(), out.row(i).data(), B.cols);
  Var o = t.push(std::move(out), {a, b});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, b, o] {
      const Matrix<T>& A = t.value(a);
      const Matrix<T>& B = t.value(b);
      const Matrix<T>& G = t.grad(o);
      if (t.needs_grad(a)) {
        Matrix<T>& GA = t.grad(a);
        for (std::size_t i = 0; i < A.rows; ++i)
          for (std::size_t p = 0; p < A.cols; ++p) GA(i, p) += kernels::dot(G.row(i).data(), B.row(p).data(), B.cols);
      }
      if (t.needs_grad(b)) {
        Matrix<T>& GB = t.grad(b);
        for (std::size_t i = 0; i < A.rows; ++i)
          for (std::size_t p = 0; p < A.cols; ++p) kernels::axpy(A(i, p), G.row(i).data(), GB.row(p).data(), G.cols);
      }
    });
  return o;
}

template <typename T>
Var matmul_nt(Tape<T>& t, Var a, Var b) {
  const Matrix<T>& A = t.value(a);
  const Matrix<T>& B = t.value(b);
  require<T>(A.cols == B.cols, "matmul_nt", dims(A) + " by " + dims(B) + "^T");
  Matrix<T> out(A.rows, B.rows);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < B.rows; ++j) out(i, j) = kernels::dot(A.row(i).data(), B.row(j).data(), A.cols);
  Var o = t.push(std::move(out), {a, b});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, b, o] {
      const Matrix<T>& A = t.value(a);
      const Matrix<T>& B = t.value(b);
      const Matrix<T>& G = t.grad(o);
      if (t.needs_grad(a)) {
        Matrix<T>& GA = t.grad(a);
        for (std::size_t i = 0; i < A.rows; ++i)
          for (std::size_t j = 0; j < B.rows; ++j) kernels::axpy(G(i, j), B.row(j).data(), GA.row(i).data(), A.cols);
      }
      if (t.needs_grad(b)) {
        Matrix<T>& GB = t.grad(b);
        for (std::size_t i = 0; i < A.rows; ++i)
          for (std::size_t j = 0; j < B.rows; ++j) kernels::axpy(G(i, j), A.row(i).data(), GB.row(j).data(), A.cols);
      }
    });
  return o;
}

template <typename T>
Var linear(Tape<T>& t, Var x, Var kernel, Var bias) {
  const Matrix<T>& X = t.value(x);
  const Matrix<T>& W = t.value(kernel);
  const Matrix<T>& B = t.value(bias);
  require<T>(X.cols == W.rows, "linear", "input " + dims(X) + " vs kernel " + dims(W));
  require<T>(B.rows == 1 && B.cols == W.cols, "linear", "bias " + dims(B) + " vs kernel " + dims(W));
  Matrix<T> out(X.rows, W.cols);
  for (std::size_t i = 0; i < X.rows; ++i) {
    T* orow = out.row(i).data();
    for (std::size_t k = 0; k < X.cols; ++k) kernels::axpy(X(i, k), W.row(k).data(), orow, W.cols);
    kernels::axpy(T(1), B.data.data(), orow, W.cols);
  }
  Var o = t.push(std::move(out), {x, kernel, bias});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, x, kernel, bias, o] {
      const Matrix<T>& X = t.value(x);
      const Matrix<T>& W = t.value(kernel);
      const Matrix<T>& G = t.grad(o);
      if (t.needs_grad(x)) {
        Matrix<T>& GX = t.grad(x);
        for (std::size_t i = 0; i < X.rows; ++i)
          for (std::size_t k = 0; k < X.cols; ++k) GX(i, k) += kernels::dot(G.row(i).data(), W.row(k).data(), W.cols);
      }
      if (t.needs_grad(kernel)) {
        Matrix<T>& GW = t.grad(kernel);
        for (std::size_t i = 0; i < X.rows; ++i)
          for (std::size_t k = 0; k < X.cols; ++k) {
            const T xv = X(i, k);
            if (xv != T(0)) kernels::axpy(xv, G.row(i).data(), GW.row(k).data(), W.cols);
          }
      }
      if (t.needs_grad(bias)) {
        Matrix<T>& GB = t.grad(bias);
        for (std::size_t i = 0; i < G.rows; ++i) kernels::axpy(T(1), G.row(i).data(), GB.data.data(), G.cols);
      }
    });
  return o;
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  const Matrix<T>& A = t.value(a);
  const Matrix<T>& B = t.value(b);
  require<T>(A.same_shape(B), "add", dims(A) + " vs " + dims(B));
  Matrix<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  Var o = t.push(std::move(out), {a, b});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, b, o] {
      const Matrix<T>& G = t.grad(o);
      for (Var v : {a, b})
        if (t.needs_grad(v)) {
          Matrix<T>& GV = t.grad(v);
          for (std::size_t i = 0; i < G.size(); ++i) GV.data[i] += G.data[i];
        }
    });
  return o;
}

template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
  const Matrix<T>& A = t.value(a);
  const Matrix<T>& B = t.value(b);
  require<T>(A.same_shape(B), "mul", dims(A) + " vs " + dims(B));
  Matrix<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
  Var o = t.push(std::move(out), {a, b});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, b, o] {
      const Matrix<T>& A = t.value(a);
      const Matrix<T>& B = t.value(b);
      const Matrix<T>& G = t.grad(o);
      if (t.needs_grad(a)) {
        Matrix<T>& GA = t.grad(a);
        for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i] * B.data[i];
      }
      if (t.needs_grad(b)) {
        Matrix<T>& GB = t.grad(b);
        for (std::size_t i = 0; i < G.size(); ++i) GB.data[i] += G.data[i] * A.data[i];
      }
    });
  return o;
}

template <typename T>
Var add_row(Tape<T>& t, Var a, Var row) {
  const Matrix<T>& A = t.value(a);
  const Matrix<T>& R = t.value(row);
  require<T>(R.rows == 1 && R.cols == A.cols, "add_row", dims(A) + " vs " + dims(R));
  Matrix<T> out = A;
  for (std::size_t i = 0; i < out.rows; ++i) kernels::axpy(T(1), R.data.data(), out.row(i).data(), A.cols);
  Var o = t.push(std::move(out), {a, row});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, row, o] {
      const Matrix<T>& G = t.grad(o);
      if (t.needs_grad(a)) {
        Matrix<T>& GA = t.grad(a);
        for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i];
      }
      if (t.needs_grad(row)) {
        Matrix<T>& GR = t.grad(row);
        for (std::size_t i = 0; i < G.rows; ++i) kernels::axpy(T(1), G.row(i).data(), GR.data.data(), G.cols);
      }
    });
  return o;
}

template <typename T>
Var mul_row(Tape<T>& t, Var a, Var row) {
  const Matrix<T>& A = t.value(a);
  const Matrix<T>& R = t.value(row);
  require<T>(R.rows == 1 && R.cols == A.cols, "mul_row", dims(A) + " vs " + dims(R));
  Matrix<T> out = A;
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) *= R.data[j];
  Var o = t.push(std::move(out), {a, row});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, row, o] {
      const Matrix<T>& A = t.value(a);
      const Matrix<T>& R = t.value(row);
      const Matrix<T>& G = t.grad(o);
      if (t.needs_grad(a)) {
        Matrix<T>& GA = t.grad(a);
        for (std::size_t i = 0; i < G.rows; ++i)
          for (std::size_t j = 0; j < G.cols; ++j) GA(i, j) += G(i, j) * R.data[j];
      }
      if (t.needs_grad(row)) {
        Matrix<T>& GR = t.grad(row);
        for (std::size_t i = 0; i < G.rows; ++i)
          for (std::size_t j = 0; j < G.cols; ++j) GR.data[j] += G(i, j) * A(i, j);
      }
    });
  return o;
}

template <typename T>
Var scale(Tape<T>& t, Var a, T s) {
  Matrix<T> out = t.value(a);
  for (T& v : out.data) v *= s;
  Var o = t.push(std::move(out), {a});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, o, s] {
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GA = t.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += s * G.data[i];
    });
  return o;
}

template <typename T>
Var relu(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a);
  for (T& v : out.data) {
    t.mix_branch(v > T(0));
    v = v > T(0) ? v : T(0);
  }
  Var o = t.push(std::move(out), {a});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, o] {
      const Matrix<T>& Y = t.value(o);
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GA = t.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i)
        if (Y.data[i] > T(0)) GA.data[i] += G.data[i];
    });
  return o;
}

template <typename T>
Var tanh(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a);
  for (T& v : out.data) v = std::tanh(v);
  Var o = t.push(std::move(out), {a});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, o] {
      const Matrix<T>& Y = t.value(o);
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GA = t.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i] * (T(1) - Y.data[i] * Y.data[i]);
    });
  return o;
}

template <typename T>
Var gelu(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a);
  for (T& v : out.data) v = kernels::gelu(v);
  Var o = t.push(std::move(out), {a});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, o] {
      const Matrix<T>& X = t.value(a);
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GA = t.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i] * kernels::gelu_derivative(X.data[i]);
    });
  return o;
}

template <typename T>
Var softmax_rows(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a);
  for (std::size_t i = 0; i < out.rows; ++i) kernels::softmax_inplace(out.row(i));
  Var o = t.push(std::move(out), {a});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, o] {
      const Matrix<T>& Y = t.value(o);
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GA = t.grad(a);
      for (std::size_t i = 0; i < Y.rows; ++i) {
        const T inner = kernels::dot(G.row(i).data(), Y.row(i).data(), Y.cols);
        for (std::size_t j = 0; j < Y.cols; ++j) GA(i, j) += Y(i, j) * (G(i, j) - inner);
      }
    });
  return o;
}

template <typename T>
Var layer_norm(Tape<T>& t, Var x, Var gain, Var bias, T eps) {
  const Matrix<T>& X = t.value(x);
  const Matrix<T>& Gn = t.value(gain);
  const Matrix<T>& Bs = t.value(bias);
  require<T>(Gn.rows == 1 && Gn.cols == X.cols && Bs.same_shape(Gn), "layer_norm",
             dims(X) + " with gain " + dims(Gn));
  const std::size_t n = X.rows;
  const std::size_t c = X.cols;
  Matrix<T> xhat(n, c);
  std::vector<T> inv(n);
  Matrix<T> out(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    T mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += X(i, j);
    mu /= static_cast<T>(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (X(i, j) - mu) * (X(i, j) - mu);
    var /= static_cast<T>(c);
    inv[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (X(i, j) - mu) * inv[i];
      out(i, j) = xhat(i, j) * Gn.data[j] + Bs.data[j];
    }
  }
  Var o = t.push(std::move(out), {x, gain, bias});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, x, gain, bias, o, xhat = std::move(xhat), inv = std::move(inv)] {
      const Matrix<T>& Gn = t.value(gain);
      const Matrix<T>& G = t.grad(o);
      const std::size_t n = G.rows;
      const std::size_t c = G.cols;
      if (t.needs_grad(gain)) {
        Matrix<T>& GG = t.grad(gain);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) GG.data[j] += G(i, j) * xhat(i, j);
      }
      if (t.needs_grad(bias)) {
        Matrix<T>& GB = t.grad(bias);
        for (std::size_t i = 0; i < n; ++i) kernels::axpy(T(1), G.row(i).data(), GB.data.data(), c);
      }
      if (t.needs_grad(x)) {
        Matrix<T>& GX = t.grad(x);
        std::vector<T> gx(c);
        for (std::size_t i = 0; i < n; ++i) {
          T mean_g = 0;
          T mean_gx = 0;
          for (std::size_t j = 0; j < c; ++j) {
            gx[j] = G(i, j) * Gn.data[j];
            mean_g += gx[j];
            mean_gx += gx[j] * xhat(i, j);
          }
          mean_g /= static_cast<T>(c);
          mean_gx /= static_cast<T>(c);
          for (std::size_t j = 0; j < c; ++j) GX(i, j) += inv[i] * (gx[j] - mean_g - xhat(i, j) * mean_gx);
        }
      }
    });
  return o;
}

template <typename T>
Var embed(Tape<T>& t, Var table, std::span<const std::int32_t> ids, std::int32_t pad_id) {
  const Matrix<T>& E = t.value(table);
  Matrix<T> out(ids.size(), E.cols);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const std::int32_t id = ids[j];
    if (id < 0 || static_cast<std::size_t>(id) >= E.rows)
      throw DataError("embed: token id " + std::to_string(id) + " out of range for vocabulary of " +
                      std::to_string(E.rows));
    if (id == pad_id) continue;
    std::copy(E.row(id).begin(), E.row(id).end(), out.row(j).begin());
  }
  Var o = t.push(std::move(out), {table});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, table, o, pad_id, ids = std::vector<std::int32_t>(ids.begin(), ids.end())] {
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GE = t.grad(table);
      for (std::size_t j = 0; j < ids.size(); ++j)
        if (ids[j] != pad_id) kernels::axpy(T(1), G.row(j).data(), GE.row(ids[j]).data(), G.cols);
    });
  return o;
}

template <typename T>
Var unfold(Tape<T>& t, Var x, std::size_t width) {
  const Matrix<T>& X = t.value(x);
  require<T>(width >= 1 && X.rows >= width, "unfold", dims(X) + " with window " + std::to_string(width));
  const std::size_t n = X.rows - width + 1;
  Matrix<T> out(n, width * X.cols);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(X.data.begin() + i * X.cols, X.data.begin() + (i + width) * X.cols, out.row(i).begin());
  Var o = t.push(std::move(out), {x});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, x, o, width] {
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GX = t.grad(x);
      for (std::size_t i = 0; i < G.rows; ++i)
        kernels::axpy(T(1), G.row(i).data(), GX.data.data() + i * GX.cols, width * GX.cols);
    });
  return o;
}

template <typename T>
Var max_rows(Tape<T>& t, Var x) {
  const Matrix<T>& X = t.value(x);
  require<T>(X.rows >= 1, "max_rows", "empty input " + dims(X));
  Matrix<T> out(1, X.cols);
  std::vector<std::size_t> arg(X.cols, 0);
  for (std::size_t j = 0; j < X.cols; ++j) {
    T best = X(0, j);
    for (std::size_t i = 1; i < X.rows; ++i)
      if (X(i, j) > best) {
        best = X(i, j);
        arg[j] = i;
      }
    out.data[j] = best;
    t.mix_branch(arg[j]);
  }
  Var o = t.push(std::move(out), {x});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, x, o, arg = std::move(arg)] {
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GX = t.grad(x);
      for (std::size_t j = 0; j < G.cols; ++j) GX(arg[j], j) += G.data[j];
    });
  return o;
}

template <typename T>
Var select_row(Tape<T>& t, Var x, std::size_t r) {
  const std::size_t rows[] = {r};
  return select_rows(t, x, std::span<const std::size_t>(rows));
}

template <typename T>
Var select_rows(Tape<T>& t, Var x, std::span<const std::size_t> rows) {
  const Matrix<T>& X = t.value(x);
  Matrix<T> out(rows.size(), X.cols);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require<T>(rows[k] < X.rows, "select_rows", "row " + std::to_string(rows[k]) + " of " + dims(X));
    std::copy(X.row(rows[k]).begin(), X.row(rows[k]).end(), out.row(k).begin());
  }
  Var o = t.push(std::move(out), {x});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, x, o, rows = std::vector<std::size_t>(rows.begin(), rows.end())] {
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GX = t.grad(x);
      for (std::size_t k = 0; k < rows.size(); ++k) kernels::axpy(T(1), G.row(k).data(), GX.row(rows[k]).data(), G.cols);
    });
  return o;
}

template <typename T>
Var slice_cols(Tape<T>& t, Var x, std::size_t begin, std::size_t count) {
  const Matrix<T>& X = t.value(x);
  require<T>(begin + count <= X.cols, "slice_cols", "columns [" + std::to_string(begin) + ", +" +
                                                        std::to_string(count) + ") of " + dims(X));
  Matrix<T> out(X.rows, count);
  for (std::size_t i = 0; i < X.rows; ++i)
    std::copy_n(X.data.begin() + i * X.cols + begin, count, out.row(i).begin());
  Var o = t.push(std::move(out), {x});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, x, o, begin] {
      const Matrix<T>& G = t.grad(o);
      Matrix<T>& GX = t.grad(x);
      for (std::size_t i = 0; i < G.rows; ++i) kernels::axpy(T(1), G.row(i).data(), GX.row(i).data() + begin, G.cols);
    });
  return o;
}

template <typename T>
Var concat_cols(Tape<T>& t, std::span<const Var> parts) {
  require<T>(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t rows = t.value(parts[0]).rows;
  std::size_t cols = 0;
  for (Var p : parts) {
    require<T>(t.value(p).rows == rows, "concat_cols", "row count mismatch");
    cols += t.value(p).cols;
  }
  Matrix<T> out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix<T>& P = t.value(p);
    for (std::size_t i = 0; i < rows; ++i) std::copy(P.row(i).begin(), P.row(i).end(), out.row(i).begin() + offset);
    offset += P.cols;
  }
  Var o = t.push(std::move(out), parts);
  if (t.needs_grad(o))
    t.on_backward(o, [&t, o, parts = std::vector<Var>(parts.begin(), parts.end())] {
      const Matrix<T>& G = t.grad(o);
      std::size_t offset = 0;
      for (Var p : parts) {
        const std::size_t pc = t.value(p).cols;
        if (t.needs_grad(p)) {
          Matrix<T>& GP = t.grad(p);
          for (std::size_t i = 0; i < G.rows; ++i) kernels::axpy(T(1), G.row(i).data() + offset, GP.row(i).data(), pc);
        }
        offset += pc;
      }
    });
  return o;
}

template <typename T>
Var concat_rows(Tape<T>& t, std::span<const Var> parts) {
  require<T>(!parts.empty(), "concat_rows", "no inputs");
  const std::size_t cols = t.value(parts[0]).cols;
  std::size_t rows = 0;
  for (Var p : parts) {
    require<T>(t.value(p).cols == cols, "concat_rows", "column count mismatch");
    rows += t.value(p).rows;
  }
  Matrix<T> out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix<T>& P = t.value(p);
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + offset);
    offset += P.size();
  }
  Var o = t.push(std::move(out), parts);
  if (t.needs_grad(o))
    t.on_backward(o, [&t, o, parts = std::vector<Var>(parts.begin(), parts.end())] {
      const Matrix<T>& G = t.grad(o);
      std::size_t offset = 0;
      for (Var p : parts) {
        const std::size_t n = t.value(p).size();
        if (t.needs_grad(p)) kernels::axpy(T(1), G.data.data() + offset, t.grad(p).data.data(), n);
        offset += n;
      }
    });
  return o;
}

template <typename T>
Var cosine(Tape<T>& t, Var u, Var v) {
  const Matrix<T>& U = t.value(u);
  const Matrix<T>& V = t.value(v);
  require<T>(U.rows == 1 && U.same_shape(V), "cosine", dims(U) + " vs " + dims(V));
  const T nu = std::sqrt(kernels::dot(U.data.data(), U.data.data(), U.cols));
  const T nv = std::sqrt(kernels::dot(V.data.data(), V.data.data(), V.cols));
  const T uv = kernels::dot(U.data.data(), V.data.data(), U.cols);
  const bool degenerate = nu == T(0) || nv == T(0);
  const T c = degenerate ? T(0) : uv / (nu * nv);
  t.mix_branch(degenerate);
  Var o = t.push(Matrix<T>(1, 1, c), {u, v});
  if (t.needs_grad(o) && !degenerate)
    t.on_backward(o, [&t, u, v, o, nu, nv, c] {
      const T g = t.grad(o).data[0];
      const Matrix<T>& U = t.value(u);
      const Matrix<T>& V = t.value(v);
      if (t.needs_grad(u)) {
        Matrix<T>& GU = t.grad(u);
        for (std::size_t j = 0; j < U.cols; ++j) GU.data[j] += g * (V.data[j] / (nu * nv) - c * U.data[j] / (nu * nu));
      }
      if (t.needs_grad(v)) {
        Matrix<T>& GV = t.grad(v);
        for (std::size_t j = 0; j < V.cols; ++j) GV.data[j] += g * (U.data[j] / (nu * nv) - c * V.data[j] / (nv * nv));
      }
    });
  return o;
}

template <typename T>
Var sum(Tape<T>& t, Var a) {
  const Matrix<T>& A = t.value(a);
  T s = 0;
  for (T v : A.data) s += v;
  Var o = t.push(Matrix<T>(1, 1, s), {a});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, a, o] {
      const T g = t.grad(o).data[0];
      for (T& gv : t.grad(a).data) gv += g;
    });
  return o;
}

template <typename T>
Var mean(Tape<T>& t, Var a) {
  const std::size_t n = t.value(a).size();
  require<T>(n > 0, "mean", "empty input");
  return scale(t, sum(t, a), T(1) / static_cast<T>(n));
}

template <typename T>
Var softmax_cross_entropy(Tape<T>& t, Var logits, std::span<const std::int32_t> targets) {
  const Matrix<T>& L = t.value(logits);
  require<T>(L.rows == targets.size() && L.rows > 0, "softmax_cross_entropy",
             dims(L) + " with " + std::to_string(targets.size()) + " targets");
  Matrix<T> probs = L;
  T loss = 0;
  for (std::size_t i = 0; i < L.rows; ++i) {
    const auto target = static_cast<std::size_t>(targets[i]);
    require<T>(target < L.cols, "softmax_cross_entropy", "target out of range");
    loss += kernels::logsumexp(L.row(i)) - L(i, target);
    kernels::softmax_inplace(probs.row(i));
  }
  loss /= static_cast<T>(L.rows);
  Var o = t.push(Matrix<T>(1, 1, loss), {logits});
  if (t.needs_grad(o))
    t.on_backward(o, [&t, logits, o, probs = std::move(probs),
                      targets = std::vector<std::int32_t>(targets.begin(), targets.end())] {
      const T g = t.grad(o).data[0] / static_cast<T>(probs.rows);
      Matrix<T>& GL = t.grad(logits);
      for (std::size_t i = 0; i < probs.rows; ++i) {
        kernels::axpy(g, probs.row(i).data(), GL.row(i).data(), probs.cols);
        GL(i, static_cast<std::size_t>(targets[i])) -= g;
      }
    });
  return o;
}

#define DTR_INSTANTIATE_OPS(T)                                                                           \
  template Var matmul<T>(Tape<T>&, Var, Var);                                                            \
  template Var matmul_nt<T>(Tape<T>&, Var, Var);                                                         \
  template Var linear<T>(Tape<T>&, Var, Var, Var);                                                       \
  template Var add<T>(Tape<T>&, Var, Var);                                                               \
  template Var mul<T>(Tape<T>&, Var, Var);                                                               \
  template Var add_row<T>(Tape<T>&, Var, Var);                                                           \
  template Var mul_row<T>(Tape<T>&, Var, Var);                                                           \
  template Var scale<T>(Tape<T>&, Var, T);                                                               \
  template Var relu<T>(Tape<T>&, Var);                                                                   \
  template Var tanh<T>(Tape<T>&, Var);                                                                   \
  template Var gelu<T>(Tape<T>&, Var);                                                                   \
  template Var softmax_rows<T>(Tape<T>&, Var);                                                           \
  template Var layer_norm<T>(Tape<T>&, Var, Var, Var, T);                                                \
  template Var embed<T>(Tape<T>&, Var, std::span<const std::int32_t>, std::int32_t);                     \
  template Var unfold<T>(Tape<T>&, Var, std::size_t);                                                    \
  template Var max_rows<T>(Tape<T>&, Var);                                                               \
  template Var select_row<T>(Tape<T>&, Var, std::size_t);                                                \
  template Var select_rows<T>(Tape<T>&, Var, std::span<const std::size_t>);                              \
  template Var slice_cols<T>(Tape<T>&, Var, std::size_t, std::size_t);                                   \
  template Var concat_cols<T>(Tape<T>&, std::span<const Var>);                                           \
  template Var concat_rows<T>(Tape<T>&, std::span<const Var>);                                           \
  template Var cosine<T>(Tape<T>&, Var, Var);                                                            \
  template Var sum<T>(Tape<T>&, Var);                                                                    \
  template Var mean<T>(Tape<T>&, Var);                                                                   \
  template Var softmax_cross_entropy<T>(Tape<T>&, Var, std::span<const std::int32_t>);

DTR_INSTANTIATE_OPS(float)
DTR_INSTANTIATE_OPS(double)

#undef DTR_INSTANTIATE_OPS

}  // namespace ops
}  // namespace dtr
