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

// Shared plumbing of the acceptance suite: per-criterion outcomes, formatting
// and the trained models reused across criteria.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "trajflow/data.hpp"
#include "trajflow/model.hpp"

namespace trajflow::acceptance {

// printf-style formatting into a std::string.
std::string format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

// Outcome of one criterion: a list of measured checks, each either within its
// bound or not. A criterion passes when every check holds.
class Outcome
{
public:
  // Records a measured check; `what` states the measurement and its bound.
  bool check(bool ok, const std::string& what);
  // Informational line that does not affect the verdict.
  void note(const std::string& what);
  void skip(const std::string& reason);
  // Runs `body`, turning an escaping exception into a failed check.
  void guard(const std::string& stage, const std::function<void()>& body);

  bool skipped() const { return skipped_; }
  bool passed() const { return !skipped_ && failures_ == 0 && checks_ > 0; }
  const std::vector<std::string>& lines() const { return lines_; }

private:
  std::vector<std::string> lines_;
  int checks_ = 0;
  int failures_ = 0;
  bool skipped_ = false;
};

class Stopwatch
{
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

// Progress messages go to stderr so stdout stays a clean report.
void progress(const std::string& message);

// Synthetic constant-velocity benchmark shared by the normalisation and
// end-to-end criteria. Models are trained on first use and cached.

inline constexpr double kNoise = 0.1;  // random-walk increment std, metres
inline constexpr Index kHorizon = 12;  // predicted positions
inline constexpr Index kObserved = 8;  // observed positions

struct TrainedModel
{
  std::unique_ptr<FlowModel> model;
  std::vector<double> epoch_loss;
  double train_seconds = 0.0;
  std::string error; // non-empty when training failed
};

class ConstantVelocityBench
{
public:
  ConstantVelocityBench();

  const std::vector<TrajectoryWindow>& train_windows() const { return train_; }
  const std::vector<TrajectoryWindow>& test_windows() const { return test_; }

  static ModelConfig model_config(EncoderKind encoder, FlowKind flow);
  static TrainConfig train_config();

  TrainedModel& trained(EncoderKind encoder, FlowKind flow);

private:
  std::vector<TrajectoryWindow> train_;
  std::vector<TrajectoryWindow> test_;
  std::map<std::pair<EncoderKind, FlowKind>, TrainedModel> models_;
};

inline const std::vector<std::pair<EncoderKind, FlowKind>> kConfigurations = {
  {EncoderKind::gru, FlowKind::dnf},
  {EncoderKind::gru, FlowKind::cnf},
  {EncoderKind::cde, FlowKind::dnf},
  {EncoderKind::cde, FlowKind::cnf},
};

std::string config_name(EncoderKind encoder, FlowKind flow);

// Criteria. Each returns its outcome; the driver prints the verdict lines.

Outcome autodiff_soundness();
Outcome ode_solver();
Outcome flow_correctness();
Outcome density_normalization(ConstantVelocityBench& bench);
Outcome spline_checks();
Outcome metric_oracles();
Outcome synthetic_end_to_end(ConstantVelocityBench& bench);
Outcome marginal_vs_joint();
Outcome determinism_and_persistence();
Outcome dataset_smoke_test();

} // namespace trajflow::acceptance
