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

// The trajectory density model: a causal encoder producing the embedding
// zeta from the observed history, and a conditional normalizing flow over
// either single future positions (marginal formulation, D = 2, conditioned
// on the forecast time s) or the whole future as displacements (joint
// formulation, D = 2S).
//
// Raw windows are in world coordinates. Before reaching the networks they go
// through the preprocessing pipeline: optional min-max normalisation with
// dataset bounds, optional scale augmentation (training only), and the
// canonical frame (rotation about the last observed position, optionally
// centred on it). Densities are reported in the preprocessed frame unless the
// world-density flag is set, which adds the min-max Jacobian; rotation and
// centring have unit Jacobian.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "trajflow/data.hpp"
#include "trajflow/diffcore.hpp"
#include "trajflow/encoders.hpp"
#include "trajflow/flows.hpp"
#include "trajflow/nn.hpp"
#include "trajflow/odeint.hpp"

namespace trajflow {

enum class EncoderKind
{
  gru,
  cde,
};

enum class FlowKind
{
  dnf, // affine coupling stack
  cnf, // continuous flow
};

enum class Formulation
{
  marginal,
  joint,
};

struct PreprocessConfig
{
  bool rotate = true;   // canonical rotation about the last observed position
  bool center = true;   // move the last observed position to the origin
  bool min_max = false; // dataset-level min-max normalisation
  bool augment = false; // random scaling of training windows
  double augment_min = 0.3;
  double augment_max = 1.7;
};

struct ModelConfig
{
  EncoderKind encoder = EncoderKind::cde;
  FlowKind flow = FlowKind::cnf;
  Formulation formulation = Formulation::marginal;
  Index horizon = 12; // S
  Index hidden_dim = 64;
  Index cde_width = 128;      // width of the CDE vector-field perceptron
  Index coupling_layers = 8;
  Index coupling_hidden = 64;
  Index cnf_hidden = 64;
  Index cnf_depth = 3;
  // Trace estimator used while training the continuous flow; evaluation
  // always uses the exact trace. Defaults: exact for marginal, Hutchinson
  // for joint.
  std::optional<TraceMode> train_trace;
  Index hutchinson_probes = 1;
  double norm_momentum = 0.1; // batch-norm running-statistics update rate
  SolverConfig flow_solver;
  SolverConfig encoder_solver;
  PreprocessConfig preprocess;
  std::uint64_t seed = 0; // parameter initialisation and Hutchinson probes

  Index flow_dim() const { return formulation == Formulation::marginal ? 2 : 2 * horizon; }
  TraceMode effective_train_trace() const;
  void validate() const;
};

std::string to_string(EncoderKind k);
std::string to_string(FlowKind k);
std::string to_string(Formulation f);
EncoderKind parse_encoder_kind(const std::string& s);
FlowKind parse_flow_kind(const std::string& s);
Formulation parse_formulation(const std::string& s);

struct TrainConfig
{
  double learning_rate = 1e-3;
  double gamma = 0.999; // learning-rate decay per epoch
  Index epochs = 10;
  Index batch_size = 64;
  std::uint64_t seed = 0; // shuffling and augmentation
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 10.0; // global gradient norm; <= 0 disables clipping

  void validate() const;
};

class FlowModel
{
public:
  explicit FlowModel(const ModelConfig& cfg);

  // Parameters and buffers bind to members, so a model must not be copied
  // or moved while they are in use.
  FlowModel(const FlowModel&) = delete;
  FlowModel& operator=(const FlowModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterList parameters();
  BufferList buffers();

  const std::optional<MinMaxBounds>& bounds() const { return bounds_; }
  void set_bounds(const std::optional<MinMaxBounds>& b) { bounds_ = b; }

  // World window -> model frame. Augmentation is applied only when an rng is
  // given and the config enables it.
  TrajectoryWindow prepare(const TrajectoryWindow& raw, std::mt19937_64* augment_rng = nullptr) const;
  // Model-frame points of `prepared` back to world coordinates.
  Matrix to_world(const TrajectoryWindow& prepared, const Matrix& points) const;
  Matrix to_model(const TrajectoryWindow& prepared, const Matrix& world_points) const;
  // log |det d(model)/d(world)| per point.
  double world_log_jacobian() const;

  // Embeddings of prepared windows, rows = windows.
  Var encode(Tape& tape, const std::vector<const TrajectoryWindow*>& prepared);
  Matrix embed(const TrajectoryWindow& raw);

  // Marginal: log p(u | O, s) for every future position of every prepared
  // window (window-major, s ascending), rows x 1, in the model frame.
  // Joint: one row per window (requires full futures).
  Var log_prob_targets(Tape& tape, const std::vector<const TrajectoryWindow*>& prepared, FlowMode mode);
  // Mean negative log-likelihood over targets (marginal) or windows (joint).
  Var nll_loss(Tape& tape, const std::vector<const TrajectoryWindow*>& prepared, FlowMode mode);
  double nll(const std::vector<TrajectoryWindow>& raw, Index batch_size = 64);

  // Marginal: log densities of world points at forecast time s in (0, S].
  Matrix log_prob_points(const TrajectoryWindow& raw, const Matrix& world_points, double s,
                         bool world_density = false, Index chunk = 4096);
  double log_prob(const TrajectoryWindow& raw, double x, double y, double s, bool world_density = false);
  // Joint: log density of a full world future (S x 2) via displacements.
  double log_prob_joint(const TrajectoryWindow& raw, const Matrix& world_future, bool world_density = false);

  // Marginal: n world positions at forecast time s.
  Matrix sample_future(const TrajectoryWindow& raw, double s, Index n, std::uint64_t seed);
  // Marginal: positions at s from given latent draws (n x 2).
  Matrix sample_from_latent(const TrajectoryWindow& raw, double s, const Matrix& latent);
  // Joint: one world trajectory (S x 2).
  Matrix sample_joint(const TrajectoryWindow& raw, std::uint64_t seed);
  Matrix sample_joint_from_latent(const TrajectoryWindow& raw, const Matrix& latent);
  // One S x 2 trajectory per latent row (n x 2S), solved as one batch.
  std::vector<Matrix> sample_joint_batch(const TrajectoryWindow& raw, const Matrix& latent);
  std::vector<Matrix> sample_joints(const TrajectoryWindow& raw, Index n, std::uint64_t seed);
  // Joint latent of a full world future (1 x 2S), the inverse of sampling.
  Matrix joint_latent(const TrajectoryWindow& raw, const Matrix& world_future);

private:
  FlowCondition condition(Tape& tape, const Var& zeta, const std::vector<Index>& rows, const Matrix& s_enc) const;
  FlowResult flow_forward(const Var& x, const FlowCondition& cond, FlowMode mode);
  Var flow_inverse(const Var& z, const FlowCondition& cond);
  Var encode_one(Tape& tape, const TrajectoryWindow& prepared);
  void check_s(double s) const;

  ModelConfig cfg_;
  GruParams gru_;
  CdeParams cde_;
  DiscreteFlow dnf_;
  ContinuousFlow cnf_;
  std::optional<MinMaxBounds> bounds_;
  Rng probe_rng_;
};

struct TrainResult
{
  std::vector<double> epoch_loss; // mean training NLL per epoch
};

// Called after each epoch with (epoch index, mean loss); may be empty.
using EpochCallback = std::function<void(Index, double)>;

// Adam with per-epoch exponential learning-rate decay and gradient clipping.
// If min-max normalisation is enabled and the model has no bounds yet, they
// are computed from the training windows. Throws DivergenceError on a
// non-finite loss or gradient.
TrainResult train(FlowModel& model, const std::vector<TrajectoryWindow>& windows, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Self-describing JSON checkpoint: format tag and version, model config,
// preprocessing bounds, and every parameter and buffer by name.
void save_checkpoint(FlowModel& model, const std::string& path);
std::unique_ptr<FlowModel> load_checkpoint(const std::string& path);
std::string checkpoint_json(FlowModel& model);
std::unique_ptr<FlowModel> checkpoint_from_json(const std::string& text);

} // namespace trajflow
