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

#include "acceptance.hpp"

#include <cstdio>
#include <exception>
#include <iostream>

namespace trajflow::acceptance {

std::string format(const char* fmt, ...)
{
  va_list args;
  va_start(args, fmt);
  va_list copy;
  va_copy(copy, args);
  const int n = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(static_cast<std::size_t>(std::max(n, 0)), '\0');
  std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  va_end(args);
  return out;
}

bool Outcome::check(bool ok, const std::string& what)
{
  ++checks_;
  if (!ok)
    ++failures_;
  lines_.push_back((ok ? "ok    " : "FAIL  ") + what);
  return ok;
}

void Outcome::note(const std::string& what)
{
  lines_.push_back("note  " + what);
}

void Outcome::skip(const std::string& reason)
{
  skipped_ = true;
  lines_.push_back("skip  " + reason);
}

void Outcome::guard(const std::string& stage, const std::function<void()>& body)
{
  try {
    body();
  } catch (const std::exception& e) {
    check(false, stage + " threw: " + e.what());
  }
}

void progress(const std::string& message)
{
  std::cerr << "  .. " << message << std::endl;
}

std::string config_name(EncoderKind encoder, FlowKind flow)
{
  return to_string(encoder) + "-" + to_string(flow);
}

namespace {

std::vector<TrajectoryWindow> constant_velocity_windows(Index count, std::uint64_t seed)
{
  SyntheticSpec spec;
  spec.process = SyntheticProcess::constant_velocity;
  spec.count = count;
  spec.length = kObserved + kHorizon;
  spec.observed = kObserved;
  spec.noise = kNoise;
  SlicingConfig slicing;
  slicing.obs_len = kObserved;
  slicing.pred_len = kHorizon;
  return slice_windows(synthesize_dataset(spec, seed), slicing);
}

} // namespace

ConstantVelocityBench::ConstantVelocityBench()
  : train_(constant_velocity_windows(2000, 101)), test_(constant_velocity_windows(200, 202))
{
}

ModelConfig ConstantVelocityBench::model_config(EncoderKind encoder, FlowKind flow)
{
  ModelConfig cfg;
  cfg.encoder = encoder;
  cfg.flow = flow;
  cfg.formulation = Formulation::marginal;
  cfg.horizon = kHorizon;
  cfg.hidden_dim = 64;
  cfg.cde_width = 128;
  cfg.coupling_hidden = 64;
  cfg.cnf_hidden = 64;
  // The flows are very sensitive to the normalisation statistics; a slow
  // running average keeps evaluation close to the training objective.
  cfg.norm_momentum = 0.01;
  cfg.seed = 7;
  return cfg;
}

TrainConfig ConstantVelocityBench::train_config()
{
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  // Per-epoch decay lets the held-out likelihood settle instead of
  // oscillating with the last few batches.
  cfg.gamma = 0.9;
  cfg.batch_size = 64;
  cfg.epochs = 30;
  cfg.seed = 11;
  return cfg;
}

TrainedModel& ConstantVelocityBench::trained(EncoderKind encoder, FlowKind flow)
{
  auto key = std::make_pair(encoder, flow);
  auto it = models_.find(key);
  if (it != models_.end())
    return it->second;
  TrainedModel& slot = models_[key];
  const std::string name = config_name(encoder, flow);
  slot.model = std::make_unique<FlowModel>(model_config(encoder, flow));
  const TrainConfig tc = train_config();
  Stopwatch clock;
  try {
    slot.epoch_loss = train(*slot.model, train_, tc, [&](Index epoch, double loss) {
      progress(format("%s epoch %ld/%ld: train NLL %.4f (%.0f s)", name.c_str(), static_cast<long>(epoch + 1),
                      static_cast<long>(tc.epochs), loss, clock.seconds()));
    }).epoch_loss;
  } catch (const std::exception& e) {
    slot.error = e.what();
  }
  slot.train_seconds = clock.seconds();
  return slot;
}

} // namespace trajflow::acceptance
