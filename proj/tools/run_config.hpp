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

// Run configuration of the command-line tool: one JSON document covering the
// data source, model, training, evaluation, sampling and grid settings.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trajflow/config_json.hpp"
#include "trajflow/data.hpp"
#include "trajflow/inference.hpp"
#include "trajflow/model.hpp"

namespace trajflow::app {

enum class DataFormat
{
  csv,       // generic CSV with named columns
  eth_ucy,   // whitespace separated frame/agent/x/y rows
  ind,       // inD track files
  synthetic, // generated in memory
};

DataFormat parse_data_format(const std::string& s);
std::string to_string(DataFormat f);
SyntheticProcess parse_synthetic_process(const std::string& s);
std::string to_string(SyntheticProcess p);

struct DataConfig
{
  DataFormat format = DataFormat::synthetic;
  std::string path;          // file to read unless synthetic
  double frame_period = 0.4; // seconds between rows of one agent
  CsvColumns columns;        // csv format only
  SyntheticSpec synthetic;
  std::uint64_t synthetic_seed = 0;
  double train_fraction = 1.0; // < 1 holds out the rest for eval/sample/grid
  std::uint64_t split_seed = 0;
};

struct EvalConfig
{
  Index min_samples = 20;    // draws for minADE / minFDE
  Index crps_samples = 1000; // draws for RMSE / CRPS
  Index max_windows = 0;     // 0 evaluates every window
};

struct SampleConfig
{
  Index samples = 1;          // trajectories per window
  Index top_k = 1;            // candidates per step (marginal models)
  std::vector<Index> windows; // window indices; empty selects all
};

struct GridConfig
{
  GridSpec spec;
  bool relative = true;       // extents are offsets from the last observed position
  Index window = 0;
  std::vector<double> times;  // instantaneous rasters
  bool fused = true;
  Index oversample = 10;
  std::vector<std::string> formats{"csv", "pgm"};
};

struct RunConfig
{
  DataConfig data;
  SlicingConfig slicing;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  SampleConfig sample;
  GridConfig grid;
  std::uint64_t seed = 0; // drives model initialisation, training and sampling
  std::string output = "trajflow_out";

  // Appends one message per invalid setting.
  void collect_errors(ConfigErrors& errors) const;
  // Throws ConfigError listing every invalid setting.
  void validate() const;
};

Json to_json(const RunConfig& c);
// Strict: unknown keys, type errors and invalid settings are reported
// together in one ConfigError; model.seed and train.seed follow the
// top-level seed.
RunConfig run_config_from_json(const Json& j);

// Applies "dotted.path=value" to a JSON document. The value is parsed as JSON
// and taken as a plain string when that fails. Missing objects are created.
void apply_override(Json& j, const std::string& assignment);

// Reads the file (empty path: defaults), applies overrides, seed and output.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                          std::optional<std::uint64_t> seed, std::optional<std::string> output);

// Stable per-purpose seeds derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

} // namespace trajflow::app
