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

// The four commands of the trajflow tool. Each writes its outputs and the
// effective configuration (config.json) into RunConfig::output.

#include <string>
#include <vector>

#include "run_config.hpp"

namespace trajflow::app {

enum class Split
{
  train,
  test,
};

// Windows for a command: the training part of the split for training, the
// held-out part otherwise (everything when train_fraction is 1).
std::vector<TrajectoryWindow> load_windows(const RunConfig& cfg, Split split);

// Loads a checkpoint and checks that its model settings equal cfg.model;
// throws VersionError naming the differing keys.
std::unique_ptr<FlowModel> load_compatible(const RunConfig& cfg, const std::string& checkpoint);

// Writes checkpoint.json and loss.csv (epoch,nll).
void cmd_train(const RunConfig& cfg);
// Writes metrics.csv (metric,value,n_samples,n_instances,seed).
void cmd_eval(const RunConfig& cfg, const std::string& checkpoint);
// Writes samples.csv (window_id,sample_id,s,x,y).
void cmd_sample(const RunConfig& cfg, const std::string& checkpoint);
// Writes raster_<i>.<fmt> for every grid time and fused.<fmt>.
void cmd_grid(const RunConfig& cfg, const std::string& checkpoint);

} // namespace trajflow::app
