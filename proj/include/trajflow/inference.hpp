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

// Inference over a trained marginal model: occupancy-density rasters, fused
// occupancy grids accumulated over the horizon, and top-k trajectory
// extraction.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "trajflow/data.hpp"
#include "trajflow/diffcore.hpp"
#include "trajflow/model.hpp"

namespace trajflow {

// Rectangular world-coordinate raster. Cell (i, j) covers row i along y
// (from y_min upwards) and column j along x (from x_min rightwards).
struct GridSpec
{
  double x_min = -5.0, x_max = 5.0;
  double y_min = -5.0, y_max = 5.0;
  Index resolution_x = 100;
  Index resolution_y = 100;

  void validate() const; // throws ConfigError
  double cell_width() const { return (x_max - x_min) / static_cast<double>(resolution_x); }
  double cell_height() const { return (y_max - y_min) / static_cast<double>(resolution_y); }
  double cell_area() const { return cell_width() * cell_height(); }
  // Cell centres, (resolution_x * resolution_y) x 2, in row-major cell order.
  Matrix centers() const;
};

enum class GridKind
{
  density, // instantaneous density per square metre
  fused,   // normalised so the largest cell is exactly 1
};

std::string to_string(GridKind k);

struct OccupancyGrid
{
  GridSpec spec;
  GridKind kind = GridKind::density;
  Matrix values; // resolution_y x resolution_x
};

// World-frame density exp(log p(x, y | s)) at every cell centre.
OccupancyGrid density_raster(FlowModel& model, const TrajectoryWindow& raw, double s, const GridSpec& spec);

// Sums the rasters and divides by the largest cell. Throws DegeneracyError
// when the sum has no positive finite maximum.
Matrix fuse_rasters(const std::vector<Matrix>& rasters);

// Rasters at s = 1/oversample, 2/oversample, ..., horizon, fused.
OccupancyGrid additive_fusion(FlowModel& model, const TrajectoryWindow& raw, Index oversample, const GridSpec& spec);

struct TopKResult
{
  Matrix path;                // steps x 2, world coordinates
  std::vector<Index> chosen;  // index of the kept candidate per step
  Matrix candidate_log_prob;  // steps x k, model-frame log densities
};

// At every s = 1..steps draws k candidates and keeps the most likely (lowest
// index on ties). Step s consumes k standard-normal pairs from one stream
// seeded with `seed`, so k = 1 reproduces plain_trajectory.
TopKResult top_k_trajectory(FlowModel& model, const TrajectoryWindow& raw, Index k, Index steps, std::uint64_t seed);

// One independent marginal draw per step from the same stream layout.
Matrix plain_trajectory(FlowModel& model, const TrajectoryWindow& raw, Index steps, std::uint64_t seed);

// Sum of the Euclidean norms of second differences along a path.
double path_roughness(const Matrix& path);

enum class GridFormat
{
  csv,
  pgm,
};

GridFormat parse_grid_format(const std::string& s);

// CSV: a header line naming the geometry fields, their values, then one line
// per grid row with full round-trip precision.
void write_grid_csv(std::ostream& out, const OccupancyGrid& grid);
OccupancyGrid read_grid_csv(std::istream& in);
// Plain PGM (P2), values scaled by the grid maximum to 0..65535. The first
// image row is the top (largest y) grid row.
void write_grid_pgm(std::ostream& out, const OccupancyGrid& grid);

void export_grid(const OccupancyGrid& grid, const std::string& path, GridFormat format);

} // namespace trajflow
