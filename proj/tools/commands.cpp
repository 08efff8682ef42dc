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

#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "trajflow/errors.hpp"
#include "trajflow/metrics.hpp"

namespace trajflow::app {

namespace {

namespace fs = std::filesystem;

enum SeedPurpose : std::uint64_t
{
  kEvalAde = 1,
  kEvalCrps = 2,
  kSample = 3,
};

std::string number(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path prepare_output(const RunConfig& cfg)
{
  const fs::path dir(cfg.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::ofstream out(dir / "config.json");
  if (!out)
    throw IoError("cannot write '" + (dir / "config.json").string() + "'");
  out << to_json(cfg).dump(2) << '\n';
  return dir;
}

std::ofstream open_output(const fs::path& path)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void check_written(const std::ofstream& out, const fs::path& path)
{
  if (!out)
    throw IoError("failed writing '" + path.string() + "'");
}

std::vector<TrajectoryRecord> load_records(const DataConfig& d)
{
  switch (d.format) {
  case DataFormat::synthetic:
    return synthesize_dataset(d.synthetic, d.synthetic_seed);
  case DataFormat::csv:
    return load_trajectories(d.path, TrajectoryFormat::generic_csv, d.frame_period, d.columns);
  case DataFormat::ind:
    return load_trajectories(d.path, TrajectoryFormat::generic_csv, d.frame_period, CsvColumns::ind());
  case DataFormat::eth_ucy:
    break;
  }
  return load_trajectories(d.path, TrajectoryFormat::eth_ucy, d.frame_period);
}

// `samples` draws of the whole future for one window: marginal models draw
// each step independently, joint models draw whole trajectories.
std::vector<Matrix> draw_futures(FlowModel& model, const TrajectoryWindow& w, Index samples, std::uint64_t seed)
{
  const Index steps = w.future_len();
  if (model.config().formulation == Formulation::joint) {
    std::vector<Matrix> out = model.sample_joints(w, samples, seed);
    return out;
  }
  std::vector<Matrix> out(static_cast<std::size_t>(samples), Matrix(steps, 2));
  for (Index s = 1; s <= steps; ++s) {
    const Matrix draws = model.sample_future(w, static_cast<double>(s), samples, derive_seed(seed, static_cast<std::uint64_t>(s)));
    for (Index i = 0; i < samples; ++i)
      out[static_cast<std::size_t>(i)].row(s - 1) = draws.row(i);
  }
  return out;
}

} // namespace

std::vector<TrajectoryWindow> load_windows(const RunConfig& cfg, Split split)
{
  std::vector<TrajectoryWindow> windows = slice_windows(load_records(cfg.data), cfg.slicing);
  if (windows.empty())
    throw FormatError("the data source yields no windows with the configured slicing");
  if (cfg.data.train_fraction >= 1.0)
    return windows;
  auto [train, test] = split_windows(windows, cfg.data.train_fraction, cfg.data.split_seed);
  std::vector<TrajectoryWindow>& chosen = split == Split::train ? train : test;
  if (chosen.empty())
    throw FormatError("the " + std::string(split == Split::train ? "training" : "held-out") +
                      " split is empty; adjust data.train_fraction");
  return std::move(chosen);
}

std::unique_ptr<FlowModel> load_compatible(const RunConfig& cfg, const std::string& checkpoint)
{
  auto model = load_checkpoint(checkpoint);
  const Json want = trajflow::to_json(cfg.model);
  const Json have = trajflow::to_json(model->config());
  std::string diff;
  for (const auto& [key, value] : want.items())
    if (!have.contains(key) || have[key] != value)
      diff += (diff.empty() ? "" : ", ") + key;
  if (!diff.empty())
    throw VersionError("checkpoint '" + checkpoint + "' was trained with different model settings: " + diff);
  return model;
}

void cmd_train(const RunConfig& cfg)
{
  const fs::path dir = prepare_output(cfg);
  const std::vector<TrajectoryWindow> windows = load_windows(cfg, Split::train);
  FlowModel model(cfg.model);
  if (cfg.model.preprocess.min_max)
    model.set_bounds(compute_bounds(windows));

  const fs::path loss_path = dir / "loss.csv";
  std::ofstream loss = open_output(loss_path);
  loss << "epoch,nll\n";
  std::cerr << "training " << to_string(cfg.model.encoder) << "-" << to_string(cfg.model.flow) << " ("
            << to_string(cfg.model.formulation) << ") on " << windows.size() << " windows\n";
  train(model, windows, cfg.train, [&](Index epoch, double nll) {
    loss << epoch + 1 << ',' << number(nll) << '\n';
    loss.flush();
    std::cerr << "epoch " << epoch + 1 << "/" << cfg.train.epochs << "  nll " << nll << '\n';
  });
  check_written(loss, loss_path);
  save_checkpoint(model, (dir / "checkpoint.json").string());
}

void cmd_eval(const RunConfig& cfg, const std::string& checkpoint)
{
  const fs::path dir = prepare_output(cfg);
  auto model = load_compatible(cfg, checkpoint);
  std::vector<TrajectoryWindow> windows = load_windows(cfg, Split::test);
  if (cfg.eval.max_windows > 0 && static_cast<Index>(windows.size()) > cfg.eval.max_windows)
    windows.resize(static_cast<std::size_t>(cfg.eval.max_windows));

  std::vector<SampleSet> best_of, spread;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const TrajectoryWindow& w = windows[i];
    best_of.push_back({draw_futures(*model, w, cfg.eval.min_samples, derive_seed(cfg.seed, kEvalAde, i)), w.future});
    spread.push_back({draw_futures(*model, w, cfg.eval.crps_samples, derive_seed(cfg.seed, kEvalCrps, i)), w.future});
  }
  const auto n = windows.size();
  const auto ade_n = static_cast<std::size_t>(cfg.eval.min_samples);
  const auto crps_n = static_cast<std::size_t>(cfg.eval.crps_samples);
  const std::vector<MetricRow> rows{{"min_ade", mean_min_ade(best_of), ade_n, n, cfg.seed},
                                    {"min_fde", mean_min_fde(best_of), ade_n, n, cfg.seed},
                                    {"rmse", rmse(spread), crps_n, n, cfg.seed},
                                    {"crps", crps_report(spread), crps_n, n, cfg.seed}};
  const fs::path path = dir / "metrics.csv";
  std::ofstream out = open_output(path);
  write_report(out, rows);
  check_written(out, path);
  write_report(std::cout, rows);
}

void cmd_sample(const RunConfig& cfg, const std::string& checkpoint)
{
  const fs::path dir = prepare_output(cfg);
  auto model = load_compatible(cfg, checkpoint);
  const std::vector<TrajectoryWindow> windows = load_windows(cfg, Split::test);
  std::vector<Index> ids = cfg.sample.windows;
  if (ids.empty())
    for (Index i = 0; i < static_cast<Index>(windows.size()); ++i)
      ids.push_back(i);
  for (Index id : ids)
    if (id >= static_cast<Index>(windows.size()))
      throw ConfigError("sample.windows: index " + std::to_string(id) + " out of range (" +
                        std::to_string(windows.size()) + " windows)");
  const bool joint = model->config().formulation == Formulation::joint;
  if (joint && cfg.sample.top_k != 1)
    throw ConfigError("sample.top_k: top-k selection needs a marginal model");

  const fs::path path = dir / "samples.csv";
  std::ofstream out = open_output(path);
  out << "window_id,sample_id,s,x,y\n";
  const Index steps = model->config().horizon;
  for (Index id : ids) {
    const TrajectoryWindow& w = windows[static_cast<std::size_t>(id)];
    std::vector<Matrix> paths;
    if (joint) {
      paths = model->sample_joints(w, cfg.sample.samples, derive_seed(cfg.seed, kSample, static_cast<std::uint64_t>(id)));
    } else {
      for (Index i = 0; i < cfg.sample.samples; ++i) {
        const std::uint64_t seed =
          derive_seed(derive_seed(cfg.seed, kSample, static_cast<std::uint64_t>(id)), static_cast<std::uint64_t>(i));
        paths.push_back(top_k_trajectory(*model, w, cfg.sample.top_k, steps, seed).path);
      }
    }
    for (std::size_t i = 0; i < paths.size(); ++i)
      for (Index s = 0; s < steps; ++s)
        out << id << ',' << i << ',' << s + 1 << ',' << number(paths[i](s, 0)) << ',' << number(paths[i](s, 1))
            << '\n';
  }
  check_written(out, path);
}

void cmd_grid(const RunConfig& cfg, const std::string& checkpoint)
{
  const fs::path dir = prepare_output(cfg);
  auto model = load_compatible(cfg, checkpoint);
  if (model->config().formulation != Formulation::marginal)
    throw ConfigError("grid: occupancy grids need a marginal model");
  if (cfg.grid.times.empty() && !cfg.grid.fused)
    throw ConfigError("grid: nothing to do; set grid.times or grid.fused");
  const std::vector<TrajectoryWindow> windows = load_windows(cfg, Split::test);
  if (cfg.grid.window >= static_cast<Index>(windows.size()))
    throw ConfigError("grid.window: index " + std::to_string(cfg.grid.window) + " out of range (" +
                      std::to_string(windows.size()) + " windows)");
  const TrajectoryWindow& w = windows[static_cast<std::size_t>(cfg.grid.window)];
  GridSpec spec = cfg.grid.spec;
  if (cfg.grid.relative) {
    const Matrix o = w.last_observed();
    spec.x_min += o(0, 0);
    spec.x_max += o(0, 0);
    spec.y_min += o(0, 1);
    spec.y_max += o(0, 1);
  }
  auto write = [&](const OccupancyGrid& g, const std::string& stem) {
    for (const std::string& f : cfg.grid.formats)
      export_grid(g, (dir / (stem + "." + f)).string(), parse_grid_format(f));
  };
  for (std::size_t i = 0; i < cfg.grid.times.size(); ++i)
    write(density_raster(*model, w, cfg.grid.times[i], spec), "raster_" + std::to_string(i));
  if (cfg.grid.fused)
    write(additive_fusion(*model, w, cfg.grid.oversample, spec), "fused");
}

} // namespace trajflow::app
