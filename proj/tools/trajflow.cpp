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

// trajflow: train, evaluate, sample and rasterise trajectory flow models.
//
//   trajflow train  --config run.json [--seed N] [--out DIR] [--set key=value ...]
//   trajflow eval   --config run.json [--checkpoint FILE] ...
//   trajflow sample --config run.json [--checkpoint FILE] ...
//   trajflow grid   --config run.json [--checkpoint FILE] ...
//
// Exit status: 0 success, 2 configuration error, 3 data error, 4 numeric
// divergence, 1 anything else.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"
#include "trajflow/errors.hpp"

namespace {

enum ExitCode
{
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kData = 3,
  kDivergence = 4,
};

struct Options
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, Options& o, bool needs_checkpoint)
{
  cmd->add_option("--config", o.config, "JSON run configuration (defaults apply to absent keys)");
  cmd->add_option("--seed", o.seed, "seed for initialisation, training and sampling");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--set", o.overrides, "override a setting, e.g. --set train.epochs=5")->take_all();
  if (needs_checkpoint)
    cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file (default: <out>/checkpoint.json)");
}

int report(const char* kind, const std::exception& e, int code)
{
  std::cerr << "trajflow: " << kind << ": " << e.what() << '\n';
  return code;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Trajectory density forecasting with normalising flows"};
  app.require_subcommand(1);
  Options o;
  CLI::App* train = app.add_subcommand("train", "train a model and write checkpoint.json and loss.csv");
  CLI::App* eval = app.add_subcommand("eval", "write minADE/minFDE/RMSE/CRPS to metrics.csv");
  CLI::App* sample = app.add_subcommand("sample", "write sampled trajectories to samples.csv");
  CLI::App* grid = app.add_subcommand("grid", "write occupancy rasters and the fused grid");
  add_common(train, o, false);
  for (CLI::App* cmd : {eval, sample, grid})
    add_common(cmd, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  using namespace trajflow;
  try {
    const app::RunConfig cfg = app::load_run_config(o.config, o.overrides, o.seed, o.out);
    const std::string checkpoint = o.checkpoint.empty() ? cfg.output + "/checkpoint.json" : o.checkpoint;
    if (train->parsed())
      app::cmd_train(cfg);
    else if (eval->parsed())
      app::cmd_eval(cfg, checkpoint);
    else if (sample->parsed())
      app::cmd_sample(cfg, checkpoint);
    else
      app::cmd_grid(cfg, checkpoint);
    return kOk;
  } catch (const ConfigError& e) {
    return report("configuration error", e, kConfig);
  } catch (const VersionError& e) {
    return report("incompatible checkpoint", e, kConfig);
  } catch (const ContractError& e) {
    return report("invalid request", e, kConfig);
  } catch (const FormatError& e) {
    return report("data error", e, kData);
  } catch (const ParseError& e) {
    return report("data error", e, kData);
  } catch (const IoError& e) {
    return report("I/O error", e, kData);
  } catch (const DivergenceError& e) {
    return report("divergence", e, kDivergence);
  } catch (const NumericError& e) {
    return report("numeric failure", e, kDivergence);
  } catch (const NonConvergenceError& e) {
    return report("solver failure", e, kDivergence);
  } catch (const DegeneracyError& e) {
    return report("degenerate result", e, kDivergence);
  } catch (const std::exception& e) {
    return report("error", e, kOther);
  }
}
