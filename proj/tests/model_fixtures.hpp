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

// Small model configurations and helpers shared by the model unit tests and
// the acceptance suite.

#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "test_support.hpp"
#include "trajflow/data.hpp"
#include "trajflow/model.hpp"

namespace trajflow::testing {

inline ModelConfig small_config(EncoderKind encoder, FlowKind flow, Formulation formulation)
{
  ModelConfig cfg;
  cfg.encoder = encoder;
  cfg.flow = flow;
  cfg.formulation = formulation;
  cfg.horizon = 4;
  cfg.hidden_dim = 4;
  cfg.cde_width = 6;
  cfg.coupling_layers = 2;
  cfg.coupling_hidden = 4;
  cfg.cnf_hidden = 4;
  cfg.cnf_depth = 2;
  cfg.seed = 3;
  return cfg;
}

inline std::vector<TrajectoryWindow> small_windows(Index count, Index pred_len, std::uint64_t seed)
{
  SyntheticSpec spec;
  spec.count = count;
  spec.length = 6 + pred_len;
  spec.observed = 6;
  SlicingConfig sl;
  sl.obs_len = 6;
  sl.pred_len = pred_len;
  sl.step = spec.length;
  return slice_windows(synthesize_dataset(spec, seed), sl);
}

// Moves every parameter and buffer away from its (often degenerate) initial value.
inline void randomize(FlowModel& model, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  for (NamedTensor& p : model.parameters()) {
    const bool gamma = p.name.size() >= 6 && p.name.substr(p.name.size() - 6) == ".gamma";
    p.tensor->value() = gamma ? random_matrix(p.tensor->rows(), p.tensor->cols(), rng, 0.7, 1.4)
                              : random_matrix(p.tensor->rows(), p.tensor->cols(), rng, -0.4, 0.4);
  }
  for (NamedBuffer& b : model.buffers()) {
    const bool std_dev = b.name.find("std") != std::string::npos;
    *b.value = std_dev ? random_matrix(b.value->rows(), b.value->cols(), rng, 0.8, 1.25)
                       : random_matrix(b.value->rows(), b.value->cols(), rng, -0.3, 0.3);
  }
}

inline void pin_steps(SolverConfig& s, double h)
{
  s.initial_step = h;
  s.rtol = s.atol = 1.0;
  s.max_factor = 1.0 + 1e-12;
  s.min_factor = 1.0 - 1e-12;
  s.safety_factor = 1.0;
}

inline const std::vector<std::tuple<EncoderKind, FlowKind, Formulation>> kVariants = {
  {EncoderKind::gru, FlowKind::dnf, Formulation::marginal},
  {EncoderKind::gru, FlowKind::cnf, Formulation::joint},
  {EncoderKind::cde, FlowKind::dnf, Formulation::joint},
  {EncoderKind::cde, FlowKind::cnf, Formulation::marginal},
};

inline std::string variant_name(const std::tuple<EncoderKind, FlowKind, Formulation>& v)
{
  return to_string(std::get<0>(v)) + "/" + to_string(std::get<1>(v)) + "/" + to_string(std::get<2>(v));
}

} // namespace trajflow::testing
