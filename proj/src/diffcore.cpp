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

#include "trajflow/diffcore.hpp"

#include <cmath>
#include <sstream>

#include "trajflow/errors.hpp"

namespace trajflow {

std::string shape_string(const Matrix& m)
{
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

Tensor::Tensor(Index rows, Index cols, bool requires_grad)
  : value_(Matrix::Zero(rows, cols)), requires_grad_(requires_grad)
{
  if (rows <= 0 || cols <= 0)
    throw DimensionError("tensor dimensions must be positive");
}

Tensor::Tensor(Matrix value, bool requires_grad)
  : value_(std::move(value)), requires_grad_(requires_grad)
{
  if (value_.rows() <= 0 || value_.cols() <= 0)
    throw DimensionError("tensor dimensions must be positive");
}

std::vector<std::size_t> Tensor::shape() const
{
  return {static_cast<std::size_t>(value_.rows()), static_cast<std::size_t>(value_.cols())};
}

Matrix& Tensor::grad() const
{
  if (grad_.rows() != value_.rows() || grad_.cols() != value_.cols())
    grad_ = Matrix::Zero(value_.rows(), value_.cols());
  return grad_;
}

void Tensor::zero_grad() const
{
  grad().setZero();
}

const Matrix& Var::value() const
{
  return tape_->value(id_);
}

double Var::scalar() const
{
  const Matrix& v = value();
  if (v.size() != 1)
    throw ContractError("scalar() on non-scalar value " + shape_string(v));
  return v(0, 0);
}

bool Var::needs_grad() const
{
  return tape_->needs_grad(id_);
}

Var Tape::constant(Matrix value)
{
  return push(std::move(value), false, {});
}

Var Tape::constant(double value)
{
  return push(Matrix::Constant(1, 1, value), false, {});
}

Var Tape::param(const Tensor& tensor)
{
  auto it = params_.find(&tensor);
  if (it != params_.end())
    return Var(this, it->second);
  const bool g = record_ && tensor.requires_grad();
  Var v = push(tensor.value(), g, {});
  nodes_[v.id()].leaf = g ? &tensor : nullptr;
  params_.emplace(&tensor, v.id());
  return v;
}

Var Tape::push(Matrix value, bool needs_grad, Backward fn)
{
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad)
    n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g)
{
  accumulate_expr(id, g);
}

void Tape::backward(const Var& loss)
{
  if (loss.value().size() != 1)
    throw ContractError("backward() needs a scalar loss, got " + shape_string(loss.value()));
  backward(loss, Matrix::Ones(1, 1));
}

void Tape::backward(const Var& out, const Matrix& seed)
{
  if (&out.tape() != this)
    throw ContractError("backward() on a variable from another tape");
  if (seed.rows() != out.rows() || seed.cols() != out.cols())
    throw DimensionError("backward seed " + shape_string(seed) + " does not match output " +
                         shape_string(out.value()));
  for (auto& n : nodes_)
    n.grad.resize(0, 0);
  accumulate(out.id(), seed);
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0)
      continue;
    if (n.leaf) {
      if (param_sink_)
        n.leaf->grad() += n.grad;
    }
    else if (n.backward)
      n.backward(*this, n.grad);
  }
}

void Tape::rewind(std::size_t mark)
{
  if (mark > nodes_.size())
    throw ContractError("rewind past the end of the tape");
  nodes_.resize(mark);
  for (auto it = params_.begin(); it != params_.end();) {
    if (it->second >= mark)
      it = params_.erase(it);
    else
      ++it;
  }
}

namespace {

enum class Broadcast { none, row_a, row_b };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op)
{
  if (a.rows() == b.rows() && a.cols() == b.cols())
    return Broadcast::none;
  if (a.cols() == b.cols() && b.rows() == 1)
    return Broadcast::row_b;
  if (a.cols() == b.cols() && a.rows() == 1)
    return Broadcast::row_a;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
}

Tape& same_tape(const Var& a, const Var& b)
{
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape())
    throw ContractError("operands belong to different tapes");
  return a.tape();
}

// Reduces a gradient of the broadcast result back to a 1xN row.
Matrix reduce_rows(const Matrix& g)
{
  return g.colwise().sum();
}

} // namespace

Var matmul(const Var& a, const Var& b)
{
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: inner dimensions differ for " + shape_string(av) + " and " +
                         shape_string(bv));
  Matrix out = av * bv;
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), a.needs_grad() || b.needs_grad(), [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(ia))
      tp.accumulate_expr(ia, g * tp.value(ib).transpose());
    if (tp.needs_grad(ib))
      tp.accumulate_expr(ib, tp.value(ia).transpose() * g);
  });
}

namespace {

template <typename Combine, typename GradA, typename GradB>
Var binary(const Var& a, const Var& b, const char* name, Combine combine, GradA grad_a, GradB grad_b)
{
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, name);
  Matrix out;
  if (kind == Broadcast::none) {
    out = combine(av, bv);
  } else if (kind == Broadcast::row_b) {
    out = combine(av, bv.replicate(av.rows(), 1));
  } else {
    out = combine(av.replicate(bv.rows(), 1), bv);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), a.needs_grad() || b.needs_grad(),
                [ia, ib, kind, grad_a, grad_b](Tape& tp, const Matrix& g) {
                  const Matrix& av = tp.value(ia);
                  const Matrix& bv = tp.value(ib);
                  Matrix ae = kind == Broadcast::row_a ? Matrix(av.replicate(g.rows(), 1)) : av;
                  Matrix be = kind == Broadcast::row_b ? Matrix(bv.replicate(g.rows(), 1)) : bv;
                  if (tp.needs_grad(ia)) {
                    Matrix ga = grad_a(g, ae, be);
                    tp.accumulate(ia, kind == Broadcast::row_a ? reduce_rows(ga) : ga);
                  }
                  if (tp.needs_grad(ib)) {
                    Matrix gb = grad_b(g, ae, be);
                    tp.accumulate(ib, kind == Broadcast::row_b ? reduce_rows(gb) : gb);
                  }
                });
}

template <typename F, typename DF>
Var unary(const Var& a, F f, DF df)
{
  Tape& t = a.tape();
  Matrix out = f(a.value());
  const std::size_t ia = a.id();
  const std::size_t io = t.size();
  return t.push(std::move(out), a.needs_grad(), [ia, io, df](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, df(g, tp.value(ia), tp.value(io)));
  });
}

} // namespace

Var add(const Var& a, const Var& b)
{
  // Fast paths avoid materialising replicated operands.
  Tape& t = same_tape(a, b);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "add");
  Matrix out;
  if (kind == Broadcast::none)
    out = a.value() + b.value();
  else if (kind == Broadcast::row_b)
    out = a.value().rowwise() + b.value().row(0);
  else
    out = b.value().rowwise() + a.value().row(0);
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), a.needs_grad() || b.needs_grad(), [ia, ib, kind](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(ia)) {
      if (kind == Broadcast::row_a)
        tp.accumulate(ia, reduce_rows(g));
      else
        tp.accumulate(ia, g);
    }
    if (tp.needs_grad(ib)) {
      if (kind == Broadcast::row_b)
        tp.accumulate(ib, reduce_rows(g));
      else
        tp.accumulate(ib, g);
    }
  });
}

Var sub(const Var& a, const Var& b)
{
  return binary(
    a, b, "sub", [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
    [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
    [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var mul(const Var& a, const Var& b)
{
  Tape& t = same_tape(a, b);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "mul");
  if (kind == Broadcast::none) {
    Matrix out = a.value().cwiseProduct(b.value());
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(std::move(out), a.needs_grad() || b.needs_grad(), [ia, ib](Tape& tp, const Matrix& g) {
      if (tp.needs_grad(ia))
        tp.accumulate_expr(ia, g.cwiseProduct(tp.value(ib)));
      if (tp.needs_grad(ib))
        tp.accumulate_expr(ib, g.cwiseProduct(tp.value(ia)));
    });
  }
  return binary(
    a, b, "mul", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
    [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); },
    [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseProduct(x); });
}

Var neg(const Var& a)
{
  return scale(a, -1.0);
}

Var exp(const Var& a)
{
  return unary(
    a, [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
    [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); });
}

Var log(const Var& a)
{
  if ((a.value().array() <= 0.0).any())
    throw DomainError("log of a non-positive value");
  return unary(
    a, [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
    [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseQuotient(x); });
}

Var tanh(const Var& a)
{
  return unary(
    a, [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
    [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
      return (g.array() * (1.0 - y.array().square())).matrix();
    });
}

Var sigmoid(const Var& a)
{
  return unary(
    a, [](const Matrix& x) -> Matrix { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); },
    [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
      return (g.array() * y.array() * (1.0 - y.array())).matrix();
    });
}

Var square(const Var& a)
{
  return unary(
    a, [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
    [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return 2.0 * g.cwiseProduct(x); });
}

Var scale(const Var& a, double k)
{
  return unary(
    a, [k](const Matrix& x) -> Matrix { return k * x; },
    [k](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return k * g; });
}

Var add_scalar(const Var& a, double k)
{
  return unary(
    a, [k](const Matrix& x) -> Matrix { return (x.array() + k).matrix(); },
    [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var sum(const Var& a)
{
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return t.push(Matrix::Constant(1, 1, a.value().sum()), a.needs_grad(),
                [ia, r, c](Tape& tp, const Matrix& g) { tp.accumulate(ia, Matrix::Constant(r, c, g(0, 0))); });
}

Var mean(const Var& a)
{
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var row_sum(const Var& a)
{
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  const Index c = a.cols();
  return t.push(a.value().rowwise().sum(), a.needs_grad(),
                [ia, c](Tape& tp, const Matrix& g) { tp.accumulate(ia, g.replicate(1, c)); });
}

Var hcat(std::initializer_list<Var> parts)
{
  return hcat(std::vector<Var>(parts));
}

Var hcat(const std::vector<Var>& parts)
{
  if (parts.empty())
    throw ContractError("hcat of nothing");
  Tape& t = parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  bool g = false;
  for (const Var& p : parts) {
    if (&p.tape() != &t)
      throw ContractError("operands belong to different tapes");
    if (p.rows() != rows)
      throw DimensionError("hcat: row counts differ, " + shape_string(parts.front().value()) + " vs " +
                           shape_string(p.value()));
    cols += p.cols();
    g = g || p.needs_grad();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Index>> layout;
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    layout.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  return t.push(std::move(out), g, [layout](Tape& tp, const Matrix& gr) {
    Index off = 0;
    for (auto [id, c] : layout) {
      if (tp.needs_grad(id))
        tp.accumulate(id, gr.middleCols(off, c));
      off += c;
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count)
{
  if (start < 0 || count <= 0 || start + count > a.cols())
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(a.value()));
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return t.push(a.value().middleCols(start, count), a.needs_grad(), [ia, r, c, start, count](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(r, c);
    full.middleCols(start, count) = g;
    tp.accumulate(ia, full);
  });
}

Var gather_rows(const Var& a, std::vector<Index> index)
{
  Tape& t = a.tape();
  const Matrix& av = a.value();
  Matrix out(static_cast<Index>(index.size()), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= av.rows())
      throw DimensionError("gather_rows: row " + std::to_string(index[i]) + " outside " + shape_string(av));
    out.row(static_cast<Index>(i)) = av.row(index[i]);
  }
  const std::size_t ia = a.id();
  const Index r = av.rows();
  return t.push(std::move(out), a.needs_grad(), [ia, r, index = std::move(index)](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(r, g.cols());
    for (std::size_t i = 0; i < index.size(); ++i)
      full.row(index[i]) += g.row(static_cast<Index>(i));
    tp.accumulate(ia, full);
  });
}

Var row_matvec(const Var& a, const Var& c)
{
  Tape& t = same_tape(a, c);
  const Matrix& av = a.value();
  const Matrix& cv = c.value();
  const Index v = cv.cols();
  if (av.rows() != cv.rows() || v == 0 || av.cols() % v != 0)
    throw DimensionError("row_matvec: cannot apply " + shape_string(av) + " to " + shape_string(cv));
  const Index w = av.cols() / v;
  const Index rows = av.rows();
  Matrix out(rows, w);
  for (Index b = 0; b < rows; ++b) {
    Eigen::Map<const Matrix> m(av.row(b).data(), w, v);
    out.row(b).noalias() = (m * cv.row(b).transpose()).transpose();
  }
  const std::size_t ia = a.id(), ic = c.id();
  return t.push(std::move(out), a.needs_grad() || c.needs_grad(), [ia, ic, w, v, rows](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(ia);
    const Matrix& cv = tp.value(ic);
    if (tp.needs_grad(ia)) {
      Matrix ga(rows, w * v);
      for (Index b = 0; b < rows; ++b) {
        Eigen::Map<Matrix> m(ga.row(b).data(), w, v);
        m.noalias() = g.row(b).transpose() * cv.row(b);
      }
      tp.accumulate(ia, ga);
    }
    if (tp.needs_grad(ic)) {
      Matrix gc(rows, v);
      for (Index b = 0; b < rows; ++b) {
        Eigen::Map<const Matrix> m(av.row(b).data(), w, v);
        gc.row(b).noalias() = g.row(b) * m;
      }
      tp.accumulate(ic, gc);
    }
  });
}

Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights)
{
  if (terms.empty() || terms.size() != weights.size())
    throw ContractError("weighted_sum: need one weight per term");
  Tape& t = terms.front().tape();
  Matrix out = weights[0] * terms[0].value();
  bool g = terms[0].needs_grad();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    const Matrix& v = terms[i].value();
    if (&terms[i].tape() != &t)
      throw ContractError("operands belong to different tapes");
    if (v.rows() != out.rows() || v.cols() != out.cols())
      throw DimensionError("weighted_sum: shapes differ, " + shape_string(out) + " vs " + shape_string(v));
    if (weights[i] != 0.0)
      out.noalias() += weights[i] * v;
    g = g || terms[i].needs_grad();
  }
  std::vector<std::pair<std::size_t, double>> links;
  for (std::size_t i = 0; i < terms.size(); ++i)
    if (weights[i] != 0.0)
      links.emplace_back(terms[i].id(), weights[i]);
  return t.push(std::move(out), g, [links = std::move(links)](Tape& tp, const Matrix& gr) {
    for (auto [id, w] : links)
      if (tp.needs_grad(id))
        tp.accumulate_expr(id, w * gr);
  });
}

Var elementwise(Elementwise op, const Var& a, const Var& b)
{
  switch (op) {
  case Elementwise::add: return add(a, b);
  case Elementwise::sub: return sub(a, b);
  case Elementwise::mul: return mul(a, b);
  case Elementwise::neg: return neg(a);
  case Elementwise::exp: return exp(a);
  case Elementwise::log: return log(a);
  case Elementwise::tanh: return tanh(a);
  case Elementwise::sigmoid: return sigmoid(a);
  case Elementwise::square: return square(a);
  }
  throw ContractError("unknown elementwise op");
}

} // namespace trajflow
