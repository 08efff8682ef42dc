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

#include "trajflow/inference.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "trajflow/errors.hpp"

namespace trajflow {

void GridSpec::validate() const
{
  std::vector<std::string> e;
  if (!(x_max > x_min) || !(y_max > y_min) || !std::isfinite(x_max - x_min) || !std::isfinite(y_max - y_min))
    e.push_back("grid extents must be finite and non-empty");
  if (resolution_x < 2 || resolution_y < 2)
    e.push_back("grid resolution must be at least 2 cells per axis");
  if (!e.empty()) {
    std::string msg = e.front();
    for (std::size_t i = 1; i < e.size(); ++i)
      msg += "; " + e[i];
    throw ConfigError(msg);
  }
}

Matrix GridSpec::centers() const
{
  Matrix c(resolution_x * resolution_y, 2);
  const double w = cell_width(), h = cell_height();
  for (Index i = 0; i < resolution_y; ++i)
    for (Index j = 0; j < resolution_x; ++j) {
      c(i * resolution_x + j, 0) = x_min + (static_cast<double>(j) + 0.5) * w;
      c(i * resolution_x + j, 1) = y_min + (static_cast<double>(i) + 0.5) * h;
    }
  return c;
}

std::string to_string(GridKind k)
{
  return k == GridKind::density ? "density" : "fused";
}

OccupancyGrid density_raster(FlowModel& model, const TrajectoryWindow& raw, double s, const GridSpec& spec)
{
  spec.validate();
  const Matrix lp = model.log_prob_points(raw, spec.centers(), s, true);
  OccupancyGrid g{spec, GridKind::density, Matrix(spec.resolution_y, spec.resolution_x)};
  for (Index i = 0; i < spec.resolution_y; ++i)
    for (Index j = 0; j < spec.resolution_x; ++j)
      g.values(i, j) = std::exp(lp(i * spec.resolution_x + j, 0));
  return g;
}

Matrix fuse_rasters(const std::vector<Matrix>& rasters)
{
  if (rasters.empty())
    throw ContractError("fusion needs at least one raster");
  Matrix sum = Matrix::Zero(rasters.front().rows(), rasters.front().cols());
  for (const Matrix& r : rasters) {
    if (r.rows() != sum.rows() || r.cols() != sum.cols())
      throw DimensionError("rasters to fuse must share a shape");
    sum += r;
  }
  const double peak = sum.maxCoeff();
  if (!(peak > 0.0) || !std::isfinite(peak))
    throw DegeneracyError("fused occupancy has no positive finite maximum; cannot normalise");
  sum /= peak;
  return sum;
}

OccupancyGrid additive_fusion(FlowModel& model, const TrajectoryWindow& raw, Index oversample, const GridSpec& spec)
{
  if (oversample < 1)
    throw ContractError("oversample must be at least 1");
  spec.validate();
  const Index n = model.config().horizon * oversample;
  std::vector<Matrix> rasters;
  rasters.reserve(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j)
    rasters.push_back(
      density_raster(model, raw, static_cast<double>(j) / static_cast<double>(oversample), spec).values);
  return {spec, GridKind::fused, fuse_rasters(rasters)};
}

namespace {

Matrix normal_pairs(Rng& rng, Index k)
{
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix z(k, 2);
  for (Index i = 0; i < k; ++i) {
    z(i, 0) = n(rng);
    z(i, 1) = n(rng);
  }
  return z;
}

void check_steps(const FlowModel& model, Index steps)
{
  if (steps < 1 || steps > model.config().horizon)
    throw ContractError("trajectory length must lie in [1, " + std::to_string(model.config().horizon) + "]");
}

} // namespace

TopKResult top_k_trajectory(FlowModel& model, const TrajectoryWindow& raw, Index k, Index steps, std::uint64_t seed)
{
  if (k < 1)
    throw ContractError("top-k needs k >= 1");
  check_steps(model, steps);
  Rng rng(seed);
  TopKResult r{Matrix(steps, 2), {}, Matrix(steps, k)};
  for (Index s = 1; s <= steps; ++s) {
    const double t = static_cast<double>(s);
    const Matrix candidates = model.sample_from_latent(raw, t, normal_pairs(rng, k));
    const Matrix lp = model.log_prob_points(raw, candidates, t);
    Index best = 0;
    for (Index i = 1; i < k; ++i)
      if (lp(i, 0) > lp(best, 0))
        best = i;
    r.path.row(s - 1) = candidates.row(best);
    r.chosen.push_back(best);
    r.candidate_log_prob.row(s - 1) = lp.transpose();
  }
  return r;
}

Matrix plain_trajectory(FlowModel& model, const TrajectoryWindow& raw, Index steps, std::uint64_t seed)
{
  check_steps(model, steps);
  Rng rng(seed);
  Matrix path(steps, 2);
  for (Index s = 1; s <= steps; ++s)
    path.row(s - 1) = model.sample_from_latent(raw, static_cast<double>(s), normal_pairs(rng, 1));
  return path;
}

double path_roughness(const Matrix& path)
{
  double total = 0.0;
  for (Index i = 1; i + 1 < path.rows(); ++i)
    total += (path.row(i + 1) - 2.0 * path.row(i) + path.row(i - 1)).norm();
  return total;
}

GridFormat parse_grid_format(const std::string& s)
{
  if (s == "csv")
    return GridFormat::csv;
  if (s == "pgm")
    return GridFormat::pgm;
  throw ConfigError("unknown grid format '" + s + "' (expected csv or pgm)");
}

namespace {

std::string number(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

void write_grid_csv(std::ostream& out, const OccupancyGrid& grid)
{
  const GridSpec& g = grid.spec;
  out << "resolution_x,resolution_y,x_min,x_max,y_min,y_max,kind\n"
      << g.resolution_x << ',' << g.resolution_y << ',' << number(g.x_min) << ',' << number(g.x_max) << ','
      << number(g.y_min) << ',' << number(g.y_max) << ',' << to_string(grid.kind) << '\n';
  for (Index i = 0; i < grid.values.rows(); ++i) {
    for (Index j = 0; j < grid.values.cols(); ++j)
      out << (j ? "," : "") << number(grid.values(i, j));
    out << '\n';
  }
}

OccupancyGrid read_grid_csv(std::istream& in)
{
  std::string header, geometry;
  if (!std::getline(in, header) || header != "resolution_x,resolution_y,x_min,x_max,y_min,y_max,kind")
    throw FormatError("grid CSV: unexpected header");
  if (!std::getline(in, geometry))
    throw FormatError("grid CSV: missing geometry line");
  OccupancyGrid grid;
  std::vector<std::string> f;
  {
    std::stringstream ss(geometry);
    std::string cell;
    while (std::getline(ss, cell, ','))
      f.push_back(cell);
  }
  if (f.size() != 7)
    throw FormatError("grid CSV: geometry line needs 7 fields");
  try {
    grid.spec.resolution_x = std::stoll(f[0]);
    grid.spec.resolution_y = std::stoll(f[1]);
    grid.spec.x_min = std::stod(f[2]);
    grid.spec.x_max = std::stod(f[3]);
    grid.spec.y_min = std::stod(f[4]);
    grid.spec.y_max = std::stod(f[5]);
  } catch (const std::exception&) {
    throw FormatError("grid CSV: malformed geometry line");
  }
  if (f[6] == "density")
    grid.kind = GridKind::density;
  else if (f[6] == "fused")
    grid.kind = GridKind::fused;
  else
    throw FormatError("grid CSV: unknown kind '" + f[6] + "'");
  grid.spec.validate();
  grid.values.resize(grid.spec.resolution_y, grid.spec.resolution_x);
  std::string line;
  for (Index i = 0; i < grid.spec.resolution_y; ++i) {
    if (!std::getline(in, line))
      throw FormatError("grid CSV: expected " + std::to_string(grid.spec.resolution_y) + " value rows");
    std::stringstream ss(line);
    std::string cell;
    Index j = 0;
    while (std::getline(ss, cell, ',')) {
      if (j >= grid.spec.resolution_x)
        throw FormatError("grid CSV: row " + std::to_string(i) + " is too long");
      try {
        grid.values(i, j++) = std::stod(cell);
      } catch (const std::exception&) {
        throw FormatError("grid CSV: malformed value in row " + std::to_string(i));
      }
    }
    if (j != grid.spec.resolution_x)
      throw FormatError("grid CSV: row " + std::to_string(i) + " is too short");
  }
  return grid;
}

void write_grid_pgm(std::ostream& out, const OccupancyGrid& grid)
{
  const double peak = grid.values.size() ? grid.values.maxCoeff() : 0.0;
  out << "P2\n" << grid.values.cols() << ' ' << grid.values.rows() << "\n65535\n";
  for (Index i = grid.values.rows() - 1; i >= 0; --i) {
    for (Index j = 0; j < grid.values.cols(); ++j) {
      const double v = peak > 0.0 ? std::max(0.0, grid.values(i, j)) / peak : 0.0;
      out << (j ? " " : "") << static_cast<long>(std::lround(v * 65535.0));
    }
    out << '\n';
  }
}

void export_grid(const OccupancyGrid& grid, const std::string& path, GridFormat format)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write grid '" + path + "'");
  if (format == GridFormat::csv)
    write_grid_csv(out, grid);
  else
    write_grid_pgm(out, grid);
  if (!out)
    throw IoError("failed writing grid '" + path + "'");
}

} // namespace trajflow
