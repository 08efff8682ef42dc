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

// Causal encoders mapping an observed history to the conditioning embedding.
//
// Inputs are batched per observed time step: inputs[t] is a rows x 7 matrix
// holding (x, y, vx, vy, ax, ay, heading) for every window in the batch.

#include <string>
#include <vector>

#include "trajflow/diffcore.hpp"
#include "trajflow/nn.hpp"
#include "trajflow/odeint.hpp"
#include "trajflow/spline.hpp"

namespace trajflow {

inline constexpr Index kInputChannels = 7;

using InputSequence = std::vector<Matrix>;

struct GruParams
{
  Tensor W_ir, W_iz, W_in;
  Tensor W_hr, W_hz, W_hn;
  Tensor b_ir, b_iz, b_in;
  Tensor b_hr, b_hz, b_hn;
  Index input_dim = 0;
  Index hidden_dim = 0;

  GruParams() = default;
  GruParams(Index input_dim, Index hidden_dim, Rng& rng);

  void collect(ParameterList& out, const std::string& prefix);
};

Var gru_step(const GruParams& p, const Var& h_prev, const Var& x);

// Hidden states h_1..h_{T+1} of the fold starting from h_0 = 0.
std::vector<Var> gru_states(Tape& tape, const GruParams& p, const InputSequence& inputs);
Var gru_encode(Tape& tape, const GruParams& p, const InputSequence& inputs);

struct CdeParams
{
  Tensor W_embed;  // channels x hidden, initial state h(t0) = x0 W_embed
  Mlp xi;          // hidden -> hidden * channels, tanh-bounded
  Index channels = 0;
  Index hidden_dim = 0;

  CdeParams() = default;
  CdeParams(Index channels, Index hidden_dim, Index xi_width, Rng& rng);

  void collect(ParameterList& out, const std::string& prefix);
};

// Natural cubic spline through every window's inputs at times 0..T. The path
// has rows * channels columns; column b * channels + c is channel c of
// window b.
SplinePath fit_control_path(const InputSequence& inputs);

// Integrates dh/dt = xi(h) C'(t) over [0, T] starting from the embedded first
// observation; returns h(T).
Var cde_encode(Tape& tape, const CdeParams& p, const SplinePath& path, Index rows, const SolverConfig& cfg);
Var cde_encode(Tape& tape, const CdeParams& p, const InputSequence& inputs, const SolverConfig& cfg);

// Same, stopping at time t_end (used for interval checks).
Var cde_state_at(Tape& tape, const CdeParams& p, const SplinePath& path, Index rows, const Var& start, double t_start,
                 double t_end, const SolverConfig& cfg);

} // namespace trajflow
