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

// Trajectory ingestion, windowing, feature derivation and the invertible
// preprocessing transforms applied before a window reaches the model.
//
// Positions are stored as n x 2 matrices (x, y) in meters; features as
// n x 5 matrices (vx, vy, ax, ay, heading) in meters per second, meters per
// second squared and radians.

#include <cstdint>
#include <istream>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "trajflow/diffcore.hpp"

namespace trajflow {

inline constexpr Index kFeatureChannels = 5;

struct TrajectoryRecord
{
  std::string scene_id;
  std::string agent_id;
  std::vector<std::int64_t> frames; // strictly increasing
  Matrix positions;                 // frames.size() x 2
  double frame_period = 0.4;        // seconds between consecutive samples
};

enum class TrajectoryFormat
{
  generic_csv, // header naming the five columns, comma separated
  eth_ucy,     // whitespace separated "frame agent x y" rows, no header
};

// Column names looked up in a generic CSV header. The defaults are the
// canonical schema; other layouts (for example inD track files) are read by
// renaming.
struct CsvColumns
{
  std::string scene_id = "scene_id";
  std::string agent_id = "agent_id";
  std::string frame = "frame";
  std::string x = "x";
  std::string y = "y";

  // recordingId, trackId, frame, xCenter, yCenter.
  static CsvColumns ind();
};

// Groups rows by (scene, agent) and sorts each group by frame. For the
// ETH/UCY format the scene id is `scene`.
std::vector<TrajectoryRecord> parse_trajectories(std::istream& in, TrajectoryFormat format, double frame_period,
                                                 const CsvColumns& columns = {}, const std::string& scene = "");
std::vector<TrajectoryRecord> load_trajectories(const std::string& path, TrajectoryFormat format, double frame_period,
                                                const CsvColumns& columns = {});

struct SlicingConfig
{
  Index obs_len = 8;             // observed positions T + 1
  Index pred_len = 12;           // future positions S
  Index step = 1;                // stride between window starts
  Index max_trajectory_len = 0;  // agents longer than this are dropped; 0 keeps all
  bool require_full = true;      // false: evaluation windows with >= 2 future positions

  void validate() const;
};

// Invertible similarity of the plane: rotate by `angle` about the pivot and,
// if `centered`, move the pivot to the origin.
struct FrameTransform
{
  double angle = 0.0;
  double pivot_x = 0.0;
  double pivot_y = 0.0;
  bool centered = false;

  Matrix apply(const Matrix& points) const;
  Matrix invert(const Matrix& points) const;
};

// Dataset-level min-max bounds, x' = (x - min) / (max - min).
struct MinMaxBounds
{
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

  Matrix apply(const Matrix& points) const;
  Matrix invert(const Matrix& points) const;
  // log |det d(x')/d(x)| per point, a constant.
  double log_jacobian() const;
};

struct TrajectoryWindow
{
  std::string scene_id;
  std::string agent_id;
  std::int64_t first_frame = 0;
  double frame_period = 0.4;
  Matrix observed; // (T + 1) x 2
  Matrix features; // (T + 1) x 5
  Matrix future;   // S x 2 (fewer in evaluation windows)

  // Transforms applied so far, innermost first: bounds, then frame.
  std::optional<MinMaxBounds> bounds;
  std::optional<FrameTransform> frame;

  Index observed_len() const { return observed.rows(); }
  Index future_len() const { return future.rows(); }
  Matrix last_observed() const { return observed.bottomRows(1); }
};

std::vector<TrajectoryWindow> slice_windows(const std::vector<TrajectoryRecord>& records, const SlicingConfig& cfg);

// Backward differences with a forward difference at index 0; heading is
// atan2(vy, vx) in (-pi, pi], carried over from the previous step when the
// agent does not move (0 at the start).
Matrix compute_features(const Matrix& positions, double frame_period);
double wrap_angle(double a);

// Rotation about the last observed position aligning the last displacement
// with +x (identity if the last two positions coincide). With `center` the
// pivot also moves to the origin. Features are recomputed.
TrajectoryWindow canonical_rotate(const TrajectoryWindow& w, bool center = false);
FrameTransform canonical_frame(const TrajectoryWindow& w, bool center = false);
// Applies an arbitrary frame to positions, recomputes features and records
// the frame on the window.
TrajectoryWindow transform_window(const TrajectoryWindow& w, const FrameTransform& frame);
// Undoes canonical_rotate on the window.
TrajectoryWindow unrotate(const TrajectoryWindow& w);

// Bounds over every observed and future position of the given windows.
MinMaxBounds compute_bounds(const std::vector<TrajectoryWindow>& windows);
TrajectoryWindow min_max_normalize(const TrajectoryWindow& w, const MinMaxBounds& bounds);
TrajectoryWindow min_max_denormalize(const TrajectoryWindow& w);

// Scales deviations from the window mean (observed and future positions) by
// k and recomputes features.
TrajectoryWindow scale_window(const TrajectoryWindow& w, double k);
// scale_window with k drawn uniformly from [lo, hi].
TrajectoryWindow scale_augment(const TrajectoryWindow& w, std::mt19937_64& rng, double lo = 0.3, double hi = 1.7);

// d_1 = u_1 - o_T, d_s = u_s - u_{s-1}; the inverse is the cumulative sum.
Matrix to_displacements(const Matrix& future, const Matrix& last_observed);
Matrix from_displacements(const Matrix& displacements, const Matrix& last_observed);

enum class SyntheticProcess
{
  constant_velocity, // straight observed path; future random walk around the extrapolation
  two_mode_turn,     // straight observed path; future turns left or right with equal probability
};

struct SyntheticSpec
{
  SyntheticProcess process = SyntheticProcess::constant_velocity;
  Index count = 2000;       // trajectories
  Index length = 20;        // samples per trajectory
  Index observed = 8;       // samples before the future starts
  double frame_period = 0.4;
  double noise = 0.1;       // std of the per-step random-walk increments, meters
  double speed_min = 0.5;   // m/s
  double speed_max = 1.5;
  double extent = 5.0;      // start positions uniform in [-extent, extent]^2
  double turn_rate = 0.3;   // rad/s, two-mode process
};

// Records carry scene id "synthetic" and agent ids "0", "1", ...; the turn
// direction of agent i is stored in `turn_signs` when requested.
std::vector<TrajectoryRecord> synthesize_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                                                 std::vector<int>* turn_signs = nullptr);

// Ground truth of the constant-velocity process for a window whose observed
// part is the noise-free prefix: u_s ~ N(o_T + v s dt, s noise^2 I).
struct GaussianMarginal
{
  double mean_x, mean_y, variance;
};
GaussianMarginal constant_velocity_marginal(const TrajectoryWindow& w, double s, double noise);
// Expected negative log-likelihood of the true marginal, averaged over
// s = 1..horizon.
double constant_velocity_nll(Index horizon, double noise);

// Seeded random split; returns (train, test).
std::pair<std::vector<TrajectoryWindow>, std::vector<TrajectoryWindow>> split_windows(
  const std::vector<TrajectoryWindow>& windows, double train_fraction, std::uint64_t seed);

} // namespace trajflow
