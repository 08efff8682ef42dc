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

#include "trajflow/nn.hpp"

#include <cmath>

#include "trajflow/errors.hpp"

namespace trajflow {

Tensor init_weight(Index fan_in, Index fan_out, Rng& rng)
{
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(fan_in, fan_out);
  for (Index i = 0; i < w.size(); ++i)
    w.data()[i] = u(rng);
  return Tensor(std::move(w), true);
}

Linear::Linear(Index in, Index out, Rng& rng, bool zero_init)
  : weight(zero_init ? Tensor(Matrix::Zero(in, out), true) : init_weight(in, out, rng)),
    bias(Matrix::Zero(1, out), true)
{
}

Var Linear::operator()(const Var& x) const
{
  Tape& t = x.tape();
  return add(matmul(x, t.param(weight)), t.param(bias));
}

void Linear::collect(ParameterList& out, const std::string& prefix)
{
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Mlp::Mlp(const std::vector<Index>& widths, Rng& rng, bool zero_last, bool output_tanh)
  : output_tanh(output_tanh)
{
  if (widths.size() < 2)
    throw ContractError("perceptron needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers.emplace_back(widths[i], widths[i + 1], rng, zero_last && i + 2 == widths.size());
}

Var Mlp::operator()(const Var& x) const
{
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size() || output_tanh)
      h = tanh(h);
  }
  return h;
}

void Mlp::collect(ParameterList& out, const std::string& prefix)
{
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(out, prefix + "." + std::to_string(i));
}

Adam::Adam(ParameterList params, double learning_rate, double beta1, double beta2, double eps)
  : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps)
{
  if (!(learning_rate > 0.0))
    throw ContractError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ContractError("moment coefficients must lie in [0, 1)");
  for (const NamedTensor& p : params_) {
    m_.push_back(Matrix::Zero(p.tensor->rows(), p.tensor->cols()));
    v_.push_back(Matrix::Zero(p.tensor->rows(), p.tensor->cols()));
  }
}

double Adam::grad_norm() const
{
  double total = 0.0;
  for (const NamedTensor& p : params_)
    if (p.tensor->grad().size() != 0)
      total += p.tensor->grad().squaredNorm();
  return std::sqrt(total);
}

double Adam::clip_grad_norm(double max_norm)
{
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (const NamedTensor& p : params_)
      if (p.tensor->grad().size() != 0)
        p.tensor->grad() *= k;
  }
  return norm;
}

void Adam::step()
{
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i].tensor;
    if (p.grad().size() == 0) {
      m_[i] *= beta1_;
      v_[i] *= beta2_;
    } else {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad();
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad().cwiseAbs2();
    }
    p.value().array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void Adam::zero_grad()
{
  for (const NamedTensor& p : params_)
    p.tensor->zero_grad();
}

} // namespace trajflow
