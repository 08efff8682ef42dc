/*
 * Copyright 2026 The TrajFlow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Dense tensors with reverse-mode differentiation.
//
// A Tape records every primitive applied to its variables in evaluation
// order, so reversing the record is a valid topological order for the
// backward pass. Trainable values live in Tensor objects outside the tape;
// binding one with Tape::param makes backward() accumulate into
// Tensor::grad().

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace trajflow {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

std::string shape_string(const Matrix& m);

// Row-major real array, rank <= 2. Rank-1 values are stored as one row.
class Tensor
{
public:
  Tensor() = default;
  Tensor(Index rows, Index cols, bool requires_grad = false);
  explicit Tensor(Matrix value, bool requires_grad = false);

  std::vector<std::size_t> shape() const;
  Index rows() const { return value_.rows(); }
  Index cols() const { return value_.cols(); }
  Index size() const { return value_.size(); }

  Matrix& value() { return value_; }
  const Matrix& value() const { return value_; }
  std::span<double> data() { return {value_.data(), static_cast<std::size_t>(value_.size())}; }
  std::span<const double> data() const { return {value_.data(), static_cast<std::size_t>(value_.size())}; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  // Accumulated gradient, same shape as value(). Zero until a backward pass
  // reaches this tensor.
  Matrix& grad() const;
  void zero_grad() const;

private:
  Matrix value_;
  mutable Matrix grad_;
  bool requires_grad_ = false;
};

class Tape;

// Handle to one recorded value.
class Var
{
public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool needs_grad() const;

private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape
{
public:
  // Receives the upstream gradient of the node it belongs to.
  using Backward = std::function<void(Tape&, const Matrix&)>;

  // With record = false nothing is differentiable and no closures are
  // stored; use for inference.
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  Var constant(double value);
  Var param(const Tensor& tensor);

  // Appends a node. `fn` may be empty when no input needs a gradient.
  Var push(Matrix value, bool needs_grad, Backward fn);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Adds `g` into the gradient slot of node `id` (used by backward closures).
  void accumulate(std::size_t id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(std::size_t id, const Expr& g)
  {
    Node& n = nodes_[id];
    if (!n.needs_grad)
      return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  // Seeds d(loss)/d(loss) = 1; loss must be 1x1.
  void backward(const Var& loss);
  void backward(const Var& out, const Matrix& seed);

  // When false, backward() leaves parameter gradients in the tape (read them
  // with grad()) instead of adding them into Tensor::grad().
  void set_param_sink(bool on) { param_sink_ = on; }

  // Gradient reached at an intermediate node after backward(); zero-size if
  // the node was not on any path.
  const Matrix& grad(const Var& v) const { return nodes_[v.id()].grad; }

  // Drops every node recorded after `mark`.
  std::size_t mark() const { return nodes_.size(); }
  void rewind(std::size_t mark);

private:
  struct Node
  {
    Matrix value;
    Matrix grad;
    Backward backward;
    const Tensor* leaf = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
  bool record_;
  bool param_sink_ = true;
};

// Primitives. Binary elementwise ops accept equal shapes or a 1xN row that
// is broadcast over the rows of the other operand.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var square(const Var& a);

Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);

// Full reduction to 1x1.
Var sum(const Var& a);
Var mean(const Var& a);
// Per-row reduction, rows x 1.
Var row_sum(const Var& a);

Var hcat(std::initializer_list<Var> parts);
Var hcat(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Index start, Index count);
// out.row(i) = a.row(index[i]); rows may repeat.
Var gather_rows(const Var& a, std::vector<Index> index);
// Per row b: out[b] = reshape(a[b], w x v) * c[b], where c is rows x v.
Var row_matvec(const Var& a, const Var& c);

// sum_i weights[i] * terms[i]; all terms share one shape.
Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights);

// Binary elementwise selector for table-driven use.
enum class Elementwise { add, sub, mul, neg, exp, log, tanh, sigmoid, square };
Var elementwise(Elementwise op, const Var& a, const Var& b = {});

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& a) { return neg(a); }

} // namespace trajflow
