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

#include "trajflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "trajflow/config_json.hpp"
#include "trajflow/errors.hpp"

namespace trajflow {

// ---------------------------------------------------------------------------
// Configuration

TraceMode ModelConfig::effective_train_trace() const
{
  if (train_trace)
    return *train_trace;
  return formulation == Formulation::marginal ? TraceMode::exact : TraceMode::hutchinson;
}

void ModelConfig::validate() const
{
  ConfigErrors e;
  auto positive = [&e](Index v, const char* name) {
    if (v < 1)
      e.push_back(std::string(name) + " must be at least 1");
  };
  positive(horizon, "horizon");
  positive(hidden_dim, "hidden_dim");
  positive(cde_width, "cde_width");
  positive(coupling_layers, "coupling_layers");
  positive(coupling_hidden, "coupling_hidden");
  positive(cnf_hidden, "cnf_hidden");
  positive(cnf_depth, "cnf_depth");
  positive(hutchinson_probes, "hutchinson_probes");
  if (!(norm_momentum > 0.0 && norm_momentum <= 1.0))
    e.push_back("norm_momentum must lie in (0, 1]");
  if (preprocess.augment && !(preprocess.augment_min > 0.0 && preprocess.augment_max >= preprocess.augment_min))
    e.push_back("augment range must satisfy 0 < augment_min <= augment_max");
  for (auto [s, name] : {std::pair{&flow_solver, "flow_solver"}, {&encoder_solver, "encoder_solver"}}) {
    try {
      s->validate();
    } catch (const Error& err) {
      for (const std::string& m : config_error_messages(err))
        e.push_back(std::string(name) + ": " + m);
    }
  }
  throw_config_errors(e);
}

std::string to_string(EncoderKind k)
{
  return k == EncoderKind::gru ? "gru" : "cde";
}

std::string to_string(FlowKind k)
{
  return k == FlowKind::dnf ? "dnf" : "cnf";
}

std::string to_string(Formulation f)
{
  return f == Formulation::marginal ? "marginal" : "joint";
}

EncoderKind parse_encoder_kind(const std::string& s)
{
  if (s == "gru")
    return EncoderKind::gru;
  if (s == "cde")
    return EncoderKind::cde;
  throw ConfigError("unknown encoder '" + s + "' (expected gru or cde)");
}

FlowKind parse_flow_kind(const std::string& s)
{
  if (s == "dnf")
    return FlowKind::dnf;
  if (s == "cnf")
    return FlowKind::cnf;
  throw ConfigError("unknown flow '" + s + "' (expected dnf or cnf)");
}

Formulation parse_formulation(const std::string& s)
{
  if (s == "marginal")
    return Formulation::marginal;
  if (s == "joint")
    return Formulation::joint;
  throw ConfigError("unknown formulation '" + s + "' (expected marginal or joint)");
}

void TrainConfig::validate() const
{
  ConfigErrors e;
  if (!(learning_rate > 0.0))
    e.push_back("learning_rate must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0))
    e.push_back("gamma must lie in (0, 1]");
  if (epochs < 0)
    e.push_back("epochs must be non-negative");
  if (batch_size < 1)
    e.push_back("batch_size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    e.push_back("beta1 and beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0))
    e.push_back("adam_eps must be positive");
  throw_config_errors(e);
}

// ---------------------------------------------------------------------------
// Model

namespace {

constexpr std::uint64_t kProbeStream = 0x9e3779b97f4a7c15ULL;

Matrix standard_normal(Index rows, Index cols, std::uint64_t seed)
{
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i)
    m.data()[i] = n(rng);
  return m;
}

// Row-major flattening of an S x 2 matrix into 1 x 2S.
Matrix flatten(const Matrix& m)
{
  return Eigen::Map<const Matrix>(m.data(), 1, m.size());
}

Matrix unflatten(const Matrix& row, Index rows)
{
  return Eigen::Map<const Matrix>(row.data(), rows, row.size() / rows);
}

} // namespace

FlowModel::FlowModel(const ModelConfig& cfg) : cfg_(cfg), probe_rng_(cfg.seed ^ kProbeStream)
{
  cfg_.validate();
  Rng rng(cfg_.seed);
  if (cfg_.encoder == EncoderKind::gru)
    gru_ = GruParams(kInputChannels, cfg_.hidden_dim, rng);
  else
    cde_ = CdeParams(kInputChannels, cfg_.hidden_dim, cfg_.cde_width, rng);
  const Index dim = cfg_.flow_dim();
  if (cfg_.flow == FlowKind::dnf)
    dnf_ = DiscreteFlow({dim, cfg_.hidden_dim, cfg_.coupling_layers, cfg_.coupling_hidden}, rng);
  else
    cnf_ = ContinuousFlow(
      {dim, cfg_.hidden_dim, cfg_.cnf_hidden, cfg_.cnf_depth, cfg_.effective_train_trace(), cfg_.hutchinson_probes},
      rng);
  for (MovingAvgBatchNorm* n : {&dnf_.input_norm, &cnf_.input_norm, &cnf_.output_norm})
    n->momentum = cfg_.norm_momentum;
  for (MovingAvgBatchNorm& n : dnf_.norms)
    n.momentum = cfg_.norm_momentum;
}

ParameterList FlowModel::parameters()
{
  ParameterList out;
  if (cfg_.encoder == EncoderKind::gru)
    gru_.collect(out, "encoder.gru");
  else
    cde_.collect(out, "encoder.cde");
  if (cfg_.flow == FlowKind::dnf)
    dnf_.collect(out, "flow.dnf");
  else
    cnf_.collect(out, "flow.cnf");
  return out;
}

BufferList FlowModel::buffers()
{
  BufferList out;
  if (cfg_.flow == FlowKind::dnf)
    dnf_.collect_buffers(out, "flow.dnf");
  else
    cnf_.collect_buffers(out, "flow.cnf");
  return out;
}

TrajectoryWindow FlowModel::prepare(const TrajectoryWindow& raw, std::mt19937_64* augment_rng) const
{
  if (raw.bounds || raw.frame)
    throw ContractError("prepare expects a window in world coordinates");
  TrajectoryWindow w = raw;
  const PreprocessConfig& p = cfg_.preprocess;
  if (p.min_max) {
    if (!bounds_)
      throw ContractError("min-max normalisation is enabled but the model has no bounds");
    w = min_max_normalize(w, *bounds_);
  }
  if (p.augment && augment_rng)
    w = scale_augment(w, *augment_rng, p.augment_min, p.augment_max);
  if (p.rotate || p.center) {
    FrameTransform f = canonical_frame(w, p.center);
    if (!p.rotate)
      f.angle = 0.0;
    w = transform_window(w, f);
  }
  return w;
}

Matrix FlowModel::to_world(const TrajectoryWindow& prepared, const Matrix& points) const
{
  Matrix out = prepared.frame ? prepared.frame->invert(points) : points;
  return prepared.bounds ? prepared.bounds->invert(out) : out;
}

Matrix FlowModel::to_model(const TrajectoryWindow& prepared, const Matrix& world_points) const
{
  Matrix out = prepared.bounds ? prepared.bounds->apply(world_points) : world_points;
  return prepared.frame ? prepared.frame->apply(out) : out;
}

double FlowModel::world_log_jacobian() const
{
  return cfg_.preprocess.min_max && bounds_ ? bounds_->log_jacobian() : 0.0;
}

Var FlowModel::encode(Tape& tape, const std::vector<const TrajectoryWindow*>& prepared)
{
  if (prepared.empty())
    throw ContractError("encode needs at least one window");
  const Index steps = prepared.front()->observed_len();
  const Index rows = static_cast<Index>(prepared.size());
  InputSequence inputs(static_cast<std::size_t>(steps), Matrix(rows, kInputChannels));
  for (Index b = 0; b < rows; ++b) {
    const TrajectoryWindow& w = *prepared[static_cast<std::size_t>(b)];
    if (w.observed_len() != steps || w.features.rows() != steps)
      throw DimensionError("all windows in a batch must have the same observed length");
    for (Index t = 0; t < steps; ++t) {
      Matrix& m = inputs[static_cast<std::size_t>(t)];
      m(b, 0) = w.observed(t, 0);
      m(b, 1) = w.observed(t, 1);
      m.block(b, 2, 1, kFeatureChannels) = w.features.row(t);
    }
  }
  if (cfg_.encoder == EncoderKind::gru)
    return gru_encode(tape, gru_, inputs);
  return cde_encode(tape, cde_, inputs, cfg_.encoder_solver);
}

Var FlowModel::encode_one(Tape& tape, const TrajectoryWindow& prepared)
{
  return encode(tape, {&prepared});
}

Matrix FlowModel::embed(const TrajectoryWindow& raw)
{
  Tape tape(false);
  TrajectoryWindow w = prepare(raw);
  return encode_one(tape, w).value();
}

FlowCondition FlowModel::condition(Tape& tape, const Var& zeta, const std::vector<Index>& rows,
                                   const Matrix& s_enc) const
{
  return {gather_rows(zeta, rows), tape.constant(s_enc)};
}

FlowResult FlowModel::flow_forward(const Var& x, const FlowCondition& cond, FlowMode mode)
{
  if (cfg_.flow == FlowKind::dnf)
    return dnf_.forward(x, cond, mode);
  cnf_.trace = mode == FlowMode::train ? cfg_.effective_train_trace() : TraceMode::exact;
  return cnf_.forward(x, cond, mode, cfg_.flow_solver, probe_rng_);
}

Var FlowModel::flow_inverse(const Var& z, const FlowCondition& cond)
{
  if (cfg_.flow == FlowKind::dnf)
    return dnf_.inverse(z, cond).value;
  return cnf_.inverse(z, cond, cfg_.flow_solver);
}

void FlowModel::check_s(double s) const
{
  if (!(s > 0.0 && s <= static_cast<double>(cfg_.horizon)))
    throw ContractError("forecast time s = " + std::to_string(s) + " outside (0, " + std::to_string(cfg_.horizon) +
                        "]");
}

Var FlowModel::log_prob_targets(Tape& tape, const std::vector<const TrajectoryWindow*>& prepared, FlowMode mode)
{
  Var zeta = encode(tape, prepared);
  const Index S = cfg_.horizon;
  std::vector<Index> rows;
  Matrix x, s_enc;
  if (cfg_.formulation == Formulation::marginal) {
    Index n = 0;
    for (const TrajectoryWindow* w : prepared) {
      if (w->future_len() > S)
        throw ContractError("window has " + std::to_string(w->future_len()) + " future positions, horizon is " +
                            std::to_string(S));
      n += w->future_len();
    }
    x.resize(n, 2);
    s_enc.resize(n, 1);
    Index r = 0;
    for (std::size_t b = 0; b < prepared.size(); ++b)
      for (Index s = 0; s < prepared[b]->future_len(); ++s, ++r) {
        x.row(r) = prepared[b]->future.row(s);
        s_enc(r, 0) = static_cast<double>(s + 1) / static_cast<double>(S);
        rows.push_back(static_cast<Index>(b));
      }
  } else {
    x.resize(static_cast<Index>(prepared.size()), 2 * S);
    s_enc = Matrix::Zero(x.rows(), 1);
    for (std::size_t b = 0; b < prepared.size(); ++b) {
      const TrajectoryWindow& w = *prepared[b];
      if (w.future_len() != S)
        throw ContractError("joint formulation needs exactly " + std::to_string(S) + " future positions");
      x.row(static_cast<Index>(b)) = flatten(to_displacements(w.future, w.last_observed()));
      rows.push_back(static_cast<Index>(b));
    }
  }
  FlowCondition cond = condition(tape, zeta, rows, s_enc);
  FlowResult r = flow_forward(tape.constant(x), cond, mode);
  return add(standard_normal_log_prob(r.value), r.logdet);
}

Var FlowModel::nll_loss(Tape& tape, const std::vector<const TrajectoryWindow*>& prepared, FlowMode mode)
{
  return neg(mean(log_prob_targets(tape, prepared, mode)));
}

double FlowModel::nll(const std::vector<TrajectoryWindow>& raw, Index batch_size)
{
  if (raw.empty())
    throw ContractError("nll needs at least one window");
  double total = 0.0;
  double count = 0.0;
  for (std::size_t start = 0; start < raw.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(raw.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<TrajectoryWindow> prepared;
    for (std::size_t i = start; i < end; ++i)
      prepared.push_back(prepare(raw[i]));
    std::vector<const TrajectoryWindow*> ptrs;
    for (const auto& w : prepared)
      ptrs.push_back(&w);
    Tape tape(false);
    const Matrix lp = log_prob_targets(tape, ptrs, FlowMode::eval).value();
    total -= lp.sum();
    count += static_cast<double>(lp.rows());
  }
  return total / count;
}

Matrix FlowModel::log_prob_points(const TrajectoryWindow& raw, const Matrix& world_points, double s,
                                  bool world_density, Index chunk)
{
  if (cfg_.formulation != Formulation::marginal)
    throw ContractError("point densities need the marginal formulation");
  check_s(s);
  if (world_points.cols() != 2)
    throw DimensionError("points must be n x 2, got " + shape_string(world_points));
  TrajectoryWindow w = prepare(raw);
  Tape tape(false);
  Var zeta = encode_one(tape, w);
  const double correction = world_density ? world_log_jacobian() : 0.0;
  Matrix out(world_points.rows(), 1);
  const std::size_t base = tape.mark();
  for (Index start = 0; start < world_points.rows(); start += chunk) {
    const Index n = std::min(chunk, world_points.rows() - start);
    Matrix x = to_model(w, world_points.middleRows(start, n));
    FlowCondition cond =
      condition(tape, zeta, std::vector<Index>(static_cast<std::size_t>(n), 0),
                Matrix::Constant(n, 1, s / static_cast<double>(cfg_.horizon)));
    FlowResult r = flow_forward(tape.constant(x), cond, FlowMode::eval);
    out.middleRows(start, n) = (add(standard_normal_log_prob(r.value), r.logdet).value().array() + correction).matrix();
    tape.rewind(base);
  }
  return out;
}

double FlowModel::log_prob(const TrajectoryWindow& raw, double x, double y, double s, bool world_density)
{
  Matrix p(1, 2);
  p << x, y;
  return log_prob_points(raw, p, s, world_density)(0, 0);
}

double FlowModel::log_prob_joint(const TrajectoryWindow& raw, const Matrix& world_future, bool world_density)
{
  if (cfg_.formulation != Formulation::joint)
    throw ContractError("joint densities need the joint formulation");
  TrajectoryWindow w = prepare(raw);
  w.future = to_model(w, world_future);
  Tape tape(false);
  const double lp = log_prob_targets(tape, {&w}, FlowMode::eval).scalar();
  return lp + (world_density ? static_cast<double>(cfg_.horizon) * world_log_jacobian() : 0.0);
}

Matrix FlowModel::sample_from_latent(const TrajectoryWindow& raw, double s, const Matrix& latent)
{
  if (cfg_.formulation != Formulation::marginal)
    throw ContractError("per-time sampling needs the marginal formulation");
  check_s(s);
  if (latent.cols() != 2)
    throw DimensionError("latent draws must be n x 2");
  TrajectoryWindow w = prepare(raw);
  Tape tape(false);
  Var zeta = encode_one(tape, w);
  const Index n = latent.rows();
  FlowCondition cond = condition(tape, zeta, std::vector<Index>(static_cast<std::size_t>(n), 0),
                                 Matrix::Constant(n, 1, s / static_cast<double>(cfg_.horizon)));
  return to_world(w, flow_inverse(tape.constant(latent), cond).value());
}

Matrix FlowModel::sample_future(const TrajectoryWindow& raw, double s, Index n, std::uint64_t seed)
{
  return sample_from_latent(raw, s, standard_normal(n, 2, seed));
}

Matrix FlowModel::sample_joint_from_latent(const TrajectoryWindow& raw, const Matrix& latent)
{
  if (latent.rows() != 1)
    throw DimensionError("joint latent must be a single row");
  return sample_joint_batch(raw, latent).front();
}

std::vector<Matrix> FlowModel::sample_joint_batch(const TrajectoryWindow& raw, const Matrix& latent)
{
  if (cfg_.formulation != Formulation::joint)
    throw ContractError("trajectory sampling needs the joint formulation");
  const Index S = cfg_.horizon;
  if (latent.rows() < 1 || latent.cols() != 2 * S)
    throw DimensionError("joint latents must be n x " + std::to_string(2 * S));
  TrajectoryWindow w = prepare(raw);
  Tape tape(false);
  Var zeta = encode_one(tape, w);
  const Index n = latent.rows();
  FlowCondition cond = condition(tape, zeta, std::vector<Index>(static_cast<std::size_t>(n), 0), Matrix::Zero(n, 1));
  const Matrix d = flow_inverse(tape.constant(latent), cond).value();
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    out.push_back(to_world(w, from_displacements(unflatten(d.row(i), S), w.last_observed())));
  return out;
}

std::vector<Matrix> FlowModel::sample_joints(const TrajectoryWindow& raw, Index n, std::uint64_t seed)
{
  return sample_joint_batch(raw, standard_normal(n, 2 * cfg_.horizon, seed));
}

Matrix FlowModel::sample_joint(const TrajectoryWindow& raw, std::uint64_t seed)
{
  return sample_joint_from_latent(raw, standard_normal(1, 2 * cfg_.horizon, seed));
}

Matrix FlowModel::joint_latent(const TrajectoryWindow& raw, const Matrix& world_future)
{
  if (cfg_.formulation != Formulation::joint)
    throw ContractError("joint latents need the joint formulation");
  TrajectoryWindow w = prepare(raw);
  Matrix future = to_model(w, world_future);
  Tape tape(false);
  Var zeta = encode_one(tape, w);
  FlowCondition cond = condition(tape, zeta, {0}, Matrix::Zero(1, 1));
  Matrix x = flatten(to_displacements(future, w.last_observed()));
  return flow_forward(tape.constant(x), cond, FlowMode::eval).value.value();
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(FlowModel& model, const std::vector<TrajectoryWindow>& windows, const TrainConfig& cfg,
                  const EpochCallback& on_epoch)
{
  cfg.validate();
  TrainResult result;
  if (cfg.epochs == 0)
    return result;
  if (windows.empty())
    throw ContractError("training needs at least one window");
  if (model.config().preprocess.min_max && !model.bounds())
    model.set_bounds(compute_bounds(windows));

  Adam opt(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  opt.zero_grad();
  std::mt19937_64 rng(cfg.seed);
  const bool augment = model.config().preprocess.augment;
  std::vector<TrajectoryWindow> cached;
  if (!augment)
    for (const TrajectoryWindow& w : windows)
      cached.push_back(model.prepare(w));

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = cfg.learning_rate;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    double weight = 0.0;
    std::size_t batch = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<TrajectoryWindow> augmented;
      std::vector<const TrajectoryWindow*> ptrs;
      if (augment) {
        for (std::size_t i = start; i < end; ++i)
          augmented.push_back(model.prepare(windows[order[i]], &rng));
        for (const auto& w : augmented)
          ptrs.push_back(&w);
      } else {
        for (std::size_t i = start; i < end; ++i)
          ptrs.push_back(&cached[order[i]]);
      }
      double loss_value = 0.0;
      double targets = 0.0;
      try {
        Tape tape;
        Var lp = model.log_prob_targets(tape, ptrs, FlowMode::train);
        Var loss = neg(mean(lp));
        loss_value = loss.scalar();
        targets = static_cast<double>(lp.rows());
        if (!std::isfinite(loss_value))
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(batch),
                                static_cast<std::size_t>(epoch), batch);
        tape.backward(loss);
      } catch (const NumericError& e) {
        throw DivergenceError(std::string("numeric failure at epoch ") + std::to_string(epoch) + ", batch " +
                                std::to_string(batch) + ": " + e.what(),
                              static_cast<std::size_t>(epoch), batch);
      } catch (const NonConvergenceError& e) {
        throw DivergenceError(std::string("solver failure at epoch ") + std::to_string(epoch) + ", batch " +
                                std::to_string(batch) + ": " + e.what(),
                              static_cast<std::size_t>(epoch), batch);
      }
      const double norm = cfg.clip_norm > 0.0 ? opt.clip_grad_norm(cfg.clip_norm) : opt.grad_norm();
      if (!std::isfinite(norm))
        throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch),
                              static_cast<std::size_t>(epoch), batch);
      opt.step();
      opt.zero_grad();
      total += loss_value * targets;
      weight += targets;
    }
    result.epoch_loss.push_back(total / weight);
    lr *= cfg.gamma;
    opt.set_learning_rate(lr);
    if (on_epoch)
      on_epoch(epoch, result.epoch_loss.back());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kFormat = "trajflow-checkpoint";
constexpr int kVersion = 1;

Json matrix_json(const Matrix& m)
{
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

void read_matrix(const Json& j, const std::string& name, Matrix& out)
{
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw FormatError("checkpoint entry '" + name + "' is malformed");
  const Index rows = j["rows"].get<Index>(), cols = j["cols"].get<Index>();
  if (rows != out.rows() || cols != out.cols())
    throw VersionError("checkpoint entry '" + name + "' has shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", model expects " + shape_string(out));
  const auto data = j["data"].get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != rows * cols)
    throw FormatError("checkpoint entry '" + name + "' has the wrong number of values");
  std::copy(data.begin(), data.end(), out.data());
}

} // namespace

std::string checkpoint_json(FlowModel& model)
{
  Json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["model"] = to_json(model.config());
  j["bounds"] = model.bounds() ? to_json(*model.bounds()) : Json(nullptr);
  Json params = Json::object();
  for (const NamedTensor& p : model.parameters())
    params[p.name] = matrix_json(p.tensor->value());
  j["parameters"] = params;
  Json bufs = Json::object();
  for (const NamedBuffer& b : model.buffers())
    bufs[b.name] = matrix_json(*b.value);
  j["buffers"] = bufs;
  return j.dump();
}

std::unique_ptr<FlowModel> checkpoint_from_json(const std::string& text)
{
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kFormat)
    throw FormatError("not a trajflow checkpoint");
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kVersion)
    throw VersionError("unsupported checkpoint version (expected " + std::to_string(kVersion) + ")");
  ModelConfig cfg;
  ConfigErrors errors;
  read_json(j.at("model"), "model", cfg, errors);
  if (!errors.empty())
    throw VersionError("checkpoint model configuration is incompatible: " + errors.front());
  auto model = std::make_unique<FlowModel>(cfg);
  if (j.contains("bounds") && !j["bounds"].is_null()) {
    MinMaxBounds b;
    read_json(j["bounds"], "bounds", b, errors);
    if (!errors.empty())
      throw FormatError("checkpoint bounds are malformed: " + errors.front());
    model->set_bounds(b);
  }
  const Json& params = j.at("parameters");
  ParameterList list = model->parameters();
  if (params.size() != list.size())
    throw VersionError("checkpoint has " + std::to_string(params.size()) + " parameters, model expects " +
                       std::to_string(list.size()));
  for (const NamedTensor& p : list) {
    if (!params.contains(p.name))
      throw VersionError("checkpoint is missing parameter '" + p.name + "'");
    read_matrix(params[p.name], p.name, p.tensor->value());
  }
  const Json& bufs = j.at("buffers");
  for (const NamedBuffer& b : model->buffers()) {
    if (!bufs.contains(b.name))
      throw VersionError("checkpoint is missing buffer '" + b.name + "'");
    read_matrix(bufs[b.name], b.name, *b.value);
  }
  return model;
}

void save_checkpoint(FlowModel& model, const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write checkpoint '" + path + "'");
  out << checkpoint_json(model) << '\n';
  if (!out)
    throw IoError("failed writing checkpoint '" + path + "'");
}

std::unique_ptr<FlowModel> load_checkpoint(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

} // namespace trajflow
