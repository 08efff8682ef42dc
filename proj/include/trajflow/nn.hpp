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

// Small building blocks shared by the encoders and flows.

#include <random>
#include <string>
#include <vector>

#include "trajflow/diffcore.hpp"

namespace trajflow {

// Stable name -> tensor binding, used by the optimizer and checkpoints.
struct NamedTensor
{
  std::string name;
  Tensor* tensor;
};
using ParameterList = std::vector<NamedTensor>;

// Non-trainable state that must persist with the parameters (running
// statistics).
struct NamedBuffer
{
  std::string name;
  Matrix* value;
};
using BufferList = std::vector<NamedBuffer>;

using Rng = std::mt19937_64;

// Uniform in +-sqrt(1/fan_in).
Tensor init_weight(Index fan_in, Index fan_out, Rng& rng);

// y = x W + b, W is in x out.
struct Linear
{
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(Index in, Index out, Rng& rng, bool zero_init = false);

  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }

  Var operator()(const Var& x) const;
  void collect(ParameterList& out, const std::string& prefix);
};

// Perceptron with tanh between layers; optionally tanh on the output too.
struct Mlp
{
  std::vector<Linear> layers;
  bool output_tanh = false;

  Mlp() = default;
  // widths = {in, hidden..., out}
  Mlp(const std::vector<Index>& widths, Rng& rng, bool zero_last = false, bool output_tanh = false);

  Var operator()(const Var& x) const;
  void collect(ParameterList& out, const std::string& prefix);
};

// Adaptive-moment optimizer over a fixed parameter list. Parameters without
// an accumulated gradient are treated as having a zero gradient.
class Adam
{
public:
  Adam(ParameterList params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::size_t steps() const { return t_; }

  // Global L2 norm of all gradients.
  double grad_norm() const;
  // Rescales gradients so their global norm is at most max_norm; returns the
  // norm before clipping.
  double clip_grad_norm(double max_norm);
  void step();
  void zero_grad();

private:
  ParameterList params_;
  std::vector<Matrix> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

} // namespace trajflow
