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

// Conditional normalizing flows over row-batched points.
//
// Every flow maps data x (rows x D) to latent z together with the per-row
// log |det dz/dx|, conditioned on an embedding zeta (rows x c) and a
// normalised forecast time s (rows x 1). The latent distribution is the
// standard normal.

#include <cstdint>
#include <string>
#include <vector>

#include "trajflow/diffcore.hpp"
#include "trajflow/nn.hpp"
#include "trajflow/odeint.hpp"

namespace trajflow {

struct FlowCondition
{
  Var zeta; // rows x c
  Var s;    // rows x 1
};

// A transformed batch and its per-row log-determinant (rows x 1).
struct FlowResult
{
  Var value;
  Var logdet;
};

enum class FlowMode
{
  train, // batch norms update their running statistics
  eval,  // running statistics frozen
};

// log N(z; 0, I) per row, rows x 1.
Var standard_normal_log_prob(const Var& z);

// Invertible normalisation with exponential moving averages of the batch
// mean and standard deviation, followed by a learned affine map.
struct MovingAvgBatchNorm
{
  Tensor gamma; // 1 x D
  Tensor beta;  // 1 x D
  Matrix running_mean;
  Matrix running_std;
  double momentum = 0.1;
  double eps = 1e-5;

  MovingAvgBatchNorm() = default;
  explicit MovingAvgBatchNorm(Index dim);

  Index dim() const { return gamma.cols(); }

  // In train mode the running statistics are first updated from x (no
  // gradient flows through them), then used to normalise.
  FlowResult forward(const Var& x, FlowMode mode);
  FlowResult inverse(const Var& y) const;

  void collect(ParameterList& out, const std::string& prefix);
  void collect_buffers(BufferList& out, const std::string& prefix);

private:
  void check_degenerate() const;
  Var log_det(Tape& tape, Index rows) const;
};

// Affine coupling: one half of the coordinates passes through and
// conditions an elementwise scale and shift of the other half.
struct CouplingLayer
{
  Mlp scale_net; // (pass, zeta, s) -> log-scale
  Mlp shift_net; // (pass, zeta, s) -> shift
  Index dim = 0;
  Index split = 0; // number of passing coordinates
  bool odd = false; // odd layers pass the trailing half instead of the leading one

  CouplingLayer() = default;
  CouplingLayer(Index dim, Index cond_dim, Index hidden, bool odd, Rng& rng);

  FlowResult forward(const Var& x, const FlowCondition& cond) const;
  FlowResult inverse(const Var& y, const FlowCondition& cond) const;

  void collect(ParameterList& out, const std::string& prefix);

private:
  Var conditioner_input(const Var& pass, const FlowCondition& cond) const;
};

struct DiscreteFlowConfig
{
  Index dim = 2;
  Index cond_dim = 64;
  Index layers = 8;
  Index hidden = 64;
};

// Batch norm, then `layers` x (coupling, batch norm) with alternating parity.
struct DiscreteFlow
{
  MovingAvgBatchNorm input_norm;
  std::vector<CouplingLayer> couplings;
  std::vector<MovingAvgBatchNorm> norms;

  DiscreteFlow() = default;
  DiscreteFlow(const DiscreteFlowConfig& cfg, Rng& rng);

  Index dim() const { return input_norm.dim(); }

  FlowResult forward(const Var& x, const FlowCondition& cond, FlowMode mode);
  // Latent to data; logdet is log |det dx/dz|.
  FlowResult inverse(const Var& z, const FlowCondition& cond) const;
  Var log_prob(const Var& x, const FlowCondition& cond, FlowMode mode);

  void collect(ParameterList& out, const std::string& prefix);
  void collect_buffers(BufferList& out, const std::string& prefix);
};

// Gated affine layer: (x W_x + b_x) * sigmoid(t W_t + s W_s + zeta W_c + b_t)
//                      + (t W_bt + s W_bs + zeta W_bc + b_bt).
struct FilmLayer
{
  Linear main;
  Tensor W_t, W_s, W_c, b_t;     // gate path
  Tensor W_bt, W_bs, W_bc, b_bt; // bias path

  // Parts of the gate and bias that do not depend on the flow time; they are
  // fixed during one solve.
  struct Static
  {
    Var gate;
    Var bias;
  };

  FilmLayer() = default;
  FilmLayer(Index in, Index out, Index cond_dim, Rng& rng, bool zero_output = false);

  Index in_features() const { return main.in_features(); }
  Index out_features() const { return main.out_features(); }

  Static precompute(const FlowCondition& cond) const;
  // Returns the layer output and the sigmoid gate (needed for tangents).
  std::pair<Var, Var> apply(const Var& x, double t, const Static& st) const;

  void collect(ParameterList& out, const std::string& prefix);
};

Var film_apply(const FilmLayer& layer, const Var& x, const FlowCondition& cond, double t);

enum class TraceMode
{
  exact,
  hutchinson,
};

// Stack of FiLM layers with tanh in between; the last layer starts at zero
// so a fresh field is the identity flow.
struct CnfField
{
  std::vector<FilmLayer> layers;

  CnfField() = default;
  CnfField(Index dim, Index cond_dim, Index hidden, Index depth, Rng& rng);

  Index dim() const { return layers.front().in_features(); }

  std::vector<FilmLayer::Static> precompute(const FlowCondition& cond) const;

  // Output f(x, t) and the Jacobian-vector products J v for each tangent v.
  std::pair<Var, std::vector<Var>> evaluate(const Var& x, double t, const std::vector<FilmLayer::Static>& st,
                                            const std::vector<Var>& tangents) const;

  void collect(ParameterList& out, const std::string& prefix);
};

// Per-row trace of df/dx (rows x 1). Exact mode sums D basis directional
// derivatives; Hutchinson mode averages e^T J e over the given probes.
Var trace_jacobian(const CnfField& field, const Var& x, const std::vector<FilmLayer::Static>& st, double t,
                   TraceMode mode, const std::vector<Matrix>& probes = {});

// Rademacher probes (entries +-1), one rows x dim matrix per probe.
std::vector<Matrix> rademacher_probes(Index rows, Index dim, Index count, Rng& rng);

struct ContinuousFlowConfig
{
  Index dim = 2;
  Index cond_dim = 64;
  Index hidden = 64;
  Index depth = 3;
  TraceMode trace = TraceMode::exact;
  Index probes = 1;
};

// Batch norm, ODE from flow time 0 (data) to 1 (latent), batch norm.
struct ContinuousFlow
{
  MovingAvgBatchNorm input_norm;
  CnfField field;
  MovingAvgBatchNorm output_norm;
  TraceMode trace = TraceMode::exact;
  Index probes = 1;

  ContinuousFlow() = default;
  ContinuousFlow(const ContinuousFlowConfig& cfg, Rng& rng);

  Index dim() const { return input_norm.dim(); }

  // `probe_rng` is only drawn from in Hutchinson mode.
  FlowResult forward(const Var& x, const FlowCondition& cond, FlowMode mode, const SolverConfig& solver,
                     Rng& probe_rng);
  // Latent to data by integrating the field backward from 1 to 0.
  Var inverse(const Var& z, const FlowCondition& cond, const SolverConfig& solver) const;
  Var log_prob(const Var& x, const FlowCondition& cond, FlowMode mode, const SolverConfig& solver, Rng& probe_rng);

  void collect(ParameterList& out, const std::string& prefix);
  void collect_buffers(BufferList& out, const std::string& prefix);
};

} // namespace trajflow
