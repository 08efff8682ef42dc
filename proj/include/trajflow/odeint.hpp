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

// Adaptive Dormand-Prince 5(4) integration over tape variables.
//
// States are batched: every row is an independent system, but all rows share
// one step-size sequence whose error norm is taken over the whole batch.
// On a recording tape the accepted steps stay on the tape, so backward()
// differentiates the realised discretisation. On a non-recording tape
// intermediate stages are discarded after each accepted step.

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "trajflow/diffcore.hpp"

namespace trajflow {

struct SolverConfig
{
  double rtol = 1e-5;
  double atol = 1e-5;
  double initial_step = 0.0; // 0 selects the step automatically
  std::size_t max_steps = 20000;
  double safety_factor = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;

  void validate() const;
};

// dh/dt for a batch of states h (rows x dim), recorded on h's tape.
using FieldFn = std::function<Var(const Var& h, double t)>;

// A field together with the tensors it reads, for the adjoint method.
struct VectorField
{
  FieldFn eval;
  std::vector<const Tensor*> params;
};

struct AcceptedStep
{
  double t;     // time at the end of the step
  double dt;    // signed step size
  Var state;    // state at t; only valid on recording tapes
};

struct Solution
{
  Var state;
  std::vector<AcceptedStep> steps;
  std::size_t evaluations = 0;
  std::size_t rejected = 0;
};

Solution integrate(const FieldFn& field, const Var& h0, double t0, double t1, const SolverConfig& cfg);

// Plain-value convenience wrapper on a non-recording tape.
Matrix integrate_values(const FieldFn& field, const Matrix& h0, double t0, double t1, const SolverConfig& cfg);

// Fixed-step fifth-order propagation with n equal steps (no error control).
Var integrate_fixed(const FieldFn& field, const Var& h0, double t0, double t1, std::size_t n_steps);

// Field over (h, log p): returns (dh/dt, d log p/dt) where the second part is
// -trace(J) with shape rows x 1.
using AugmentedFieldFn = std::function<std::pair<Var, Var>(const Var& h, double t)>;

struct AugmentedSolution
{
  Var state;
  Var logp;
  Solution solution;
};

// Integrates h together with log p along the same adaptive trajectory.
AugmentedSolution integrate_augmented(const AugmentedFieldFn& field, const Var& h0, const Var& logp0, double t0,
                                      double t1, const SolverConfig& cfg);

struct AdjointGradients
{
  Matrix dL_dh0;
  std::vector<Matrix> dL_dparams; // parallel to VectorField::params
  Matrix h0;                      // state reconstructed at t0
};

// Continuous adjoint: integrates (h, a, dL/dtheta) backward from t1 to t0
// starting at a(t1) = dL/dh1.
AdjointGradients adjoint_gradients(const VectorField& field, const Matrix& h1, double t0, double t1,
                                   const Matrix& dL_dh1, const SolverConfig& cfg);

} // namespace trajflow
