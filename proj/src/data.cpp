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

#include "trajflow/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "trajflow/errors.hpp"

namespace trajflow {

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line, TrajectoryFormat format)
{
  std::vector<std::string> out;
  if (format == TrajectoryFormat::eth_ucy) {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok)
      out.push_back(tok);
    return out;
  }
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ','))
    out.push_back(trim(field));
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

double parse_number(const std::string& text, const std::string& column, std::size_t row)
{
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ParseError("row " + std::to_string(row) + ": column '" + column + "' has non-numeric value '" + text + "'",
                     row);
  return v;
}

std::int64_t parse_frame(const std::string& text, const std::string& column, std::size_t row)
{
  const double v = parse_number(text, column, row);
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9)
    throw ParseError("row " + std::to_string(row) + ": frame '" + text + "' is not an integer", row);
  return static_cast<std::int64_t>(r);
}

struct Sample
{
  std::int64_t frame;
  double x, y;
};

} // namespace

CsvColumns CsvColumns::ind()
{
  return {"recordingId", "trackId", "frame", "xCenter", "yCenter"};
}

std::vector<TrajectoryRecord> parse_trajectories(std::istream& in, TrajectoryFormat format, double frame_period,
                                                 const CsvColumns& columns, const std::string& scene)
{
  if (!(frame_period > 0.0))
    throw ContractError("frame period must be positive");
  std::map<std::pair<std::string, std::string>, std::vector<Sample>> groups;
  std::string line;
  std::size_t row = 0;

  std::size_t i_scene = 0, i_agent = 1, i_frame = 0, i_x = 2, i_y = 3, width = 4;
  bool have_scene_column = false;
  if (format == TrajectoryFormat::generic_csv) {
    // The header is the first non-empty line.
    while (std::getline(in, line)) {
      ++row;
      if (!trim(line).empty())
        break;
    }
    if (trim(line).empty())
      throw FormatError("missing header row");
    std::vector<std::string> header = split_fields(line, format);
    auto find = [&header](const std::string& name) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end())
        throw FormatError("missing column '" + name + "'");
      return static_cast<std::size_t>(it - header.begin());
    };
    i_scene = find(columns.scene_id);
    i_agent = find(columns.agent_id);
    i_frame = find(columns.frame);
    i_x = find(columns.x);
    i_y = find(columns.y);
    width = header.size();
    have_scene_column = true;
  } else {
    i_frame = 0;
    i_agent = 1;
    i_x = 2;
    i_y = 3;
  }

  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty())
      continue;
    std::vector<std::string> f = split_fields(line, format);
    if (f.size() < width)
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(width) + " fields, found " +
                         std::to_string(f.size()),
                       row);
    Sample s{parse_frame(f[i_frame], columns.frame, row), parse_number(f[i_x], columns.x, row),
             parse_number(f[i_y], columns.y, row)};
    std::string agent = f[i_agent];
    if (format == TrajectoryFormat::eth_ucy) {
      // Agent ids are often written as floats ("3.0").
      agent = std::to_string(parse_frame(agent, columns.agent_id, row));
    }
    groups[{have_scene_column ? f[i_scene] : scene, agent}].push_back(s);
  }

  std::vector<TrajectoryRecord> records;
  for (auto& [key, samples] : groups) {
    std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.frame < b.frame; });
    TrajectoryRecord r;
    r.scene_id = key.first;
    r.agent_id = key.second;
    r.frame_period = frame_period;
    r.positions.resize(static_cast<Index>(samples.size()), 2);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (k > 0 && samples[k].frame == samples[k - 1].frame)
        throw FormatError("duplicate frame " + std::to_string(samples[k].frame) + " for agent '" + key.second +
                          "' in scene '" + key.first + "'");
      r.frames.push_back(samples[k].frame);
      r.positions(static_cast<Index>(k), 0) = samples[k].x;
      r.positions(static_cast<Index>(k), 1) = samples[k].y;
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<TrajectoryRecord> load_trajectories(const std::string& path, TrajectoryFormat format, double frame_period,
                                                const CsvColumns& columns)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path + "'");
  std::string scene = path;
  const auto slash = scene.find_last_of('/');
  if (slash != std::string::npos)
    scene = scene.substr(slash + 1);
  const auto dot = scene.find_last_of('.');
  if (dot != std::string::npos && dot > 0)
    scene = scene.substr(0, dot);
  return parse_trajectories(in, format, frame_period, columns, scene);
}

void SlicingConfig::validate() const
{
  if (obs_len < 2)
    throw ConfigError("obs_len must be at least 2");
  if (pred_len < 1)
    throw ConfigError("pred_len must be at least 1");
  if (step < 1)
    throw ConfigError("step must be at least 1");
  if (max_trajectory_len < 0)
    throw ConfigError("max_trajectory_len must be non-negative");
  if (!require_full && pred_len < 2)
    throw ConfigError("evaluation windows need pred_len >= 2");
}

// ---------------------------------------------------------------------------
// Transforms

Matrix FrameTransform::apply(const Matrix& points) const
{
  const double c = std::cos(angle), s = std::sin(angle);
  Matrix out(points.rows(), 2);
  for (Index i = 0; i < points.rows(); ++i) {
    const double dx = points(i, 0) - pivot_x, dy = points(i, 1) - pivot_y;
    out(i, 0) = c * dx - s * dy + (centered ? 0.0 : pivot_x);
    out(i, 1) = s * dx + c * dy + (centered ? 0.0 : pivot_y);
  }
  return out;
}

Matrix FrameTransform::invert(const Matrix& points) const
{
  const double c = std::cos(angle), s = std::sin(angle);
  Matrix out(points.rows(), 2);
  for (Index i = 0; i < points.rows(); ++i) {
    const double dx = points(i, 0) - (centered ? 0.0 : pivot_x), dy = points(i, 1) - (centered ? 0.0 : pivot_y);
    out(i, 0) = c * dx + s * dy + pivot_x;
    out(i, 1) = -s * dx + c * dy + pivot_y;
  }
  return out;
}

Matrix MinMaxBounds::apply(const Matrix& points) const
{
  Matrix out(points.rows(), 2);
  out.col(0) = (points.col(0).array() - x_min) / (x_max - x_min);
  out.col(1) = (points.col(1).array() - y_min) / (y_max - y_min);
  return out;
}

Matrix MinMaxBounds::invert(const Matrix& points) const
{
  Matrix out(points.rows(), 2);
  out.col(0) = points.col(0).array() * (x_max - x_min) + x_min;
  out.col(1) = points.col(1).array() * (y_max - y_min) + y_min;
  return out;
}

double MinMaxBounds::log_jacobian() const
{
  return -std::log((x_max - x_min) * (y_max - y_min));
}

double wrap_angle(double a)
{
  a = std::remainder(a, 2.0 * std::numbers::pi); // [-pi, pi]
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

Matrix compute_features(const Matrix& positions, double frame_period)
{
  const Index n = positions.rows();
  if (n < 2)
    throw ContractError("features need at least two positions");
  Matrix vel(n, 2), acc(n, 2);
  for (Index t = 1; t < n; ++t)
    vel.row(t) = (positions.row(t) - positions.row(t - 1)) / frame_period;
  vel.row(0) = vel.row(1);
  for (Index t = 1; t < n; ++t)
    acc.row(t) = (vel.row(t) - vel.row(t - 1)) / frame_period;
  acc.row(0) = (vel.row(1) - vel.row(0)) / frame_period; // forward difference, zero by construction
  Matrix f(n, kFeatureChannels);
  double heading = 0.0;
  for (Index t = 0; t < n; ++t) {
    if (vel(t, 0) != 0.0 || vel(t, 1) != 0.0)
      heading = wrap_angle(std::atan2(vel(t, 1), vel(t, 0)));
    f(t, 0) = vel(t, 0);
    f(t, 1) = vel(t, 1);
    f(t, 2) = acc(t, 0);
    f(t, 3) = acc(t, 1);
    f(t, 4) = heading;
  }
  return f;
}

std::vector<TrajectoryWindow> slice_windows(const std::vector<TrajectoryRecord>& records, const SlicingConfig& cfg)
{
  cfg.validate();
  std::vector<TrajectoryWindow> out;
  for (const TrajectoryRecord& r : records) {
    const Index n = r.positions.rows();
    if (cfg.max_trajectory_len > 0 && n > cfg.max_trajectory_len)
      continue;
    const Index min_future = cfg.require_full ? cfg.pred_len : 2;
    for (Index start = 0; start + cfg.obs_len + min_future <= n; start += cfg.step) {
      TrajectoryWindow w;
      w.scene_id = r.scene_id;
      w.agent_id = r.agent_id;
      w.first_frame = r.frames[static_cast<std::size_t>(start)];
      w.frame_period = r.frame_period;
      w.observed = r.positions.middleRows(start, cfg.obs_len);
      const Index future = std::min(cfg.pred_len, n - start - cfg.obs_len);
      w.future = r.positions.middleRows(start + cfg.obs_len, future);
      w.features = compute_features(w.observed, r.frame_period);
      out.push_back(std::move(w));
    }
  }
  return out;
}

FrameTransform canonical_frame(const TrajectoryWindow& w, bool center)
{
  const Index T = w.observed.rows() - 1;
  if (T < 1)
    throw ContractError("canonical rotation needs at least two observed positions");
  const double dx = w.observed(T, 0) - w.observed(T - 1, 0);
  const double dy = w.observed(T, 1) - w.observed(T - 1, 1);
  FrameTransform f;
  f.angle = (dx == 0.0 && dy == 0.0) ? 0.0 : -std::atan2(dy, dx);
  f.pivot_x = w.observed(T, 0);
  f.pivot_y = w.observed(T, 1);
  f.centered = center;
  return f;
}

TrajectoryWindow transform_window(const TrajectoryWindow& w, const FrameTransform& frame)
{
  if (w.frame)
    throw ContractError("window is already in a canonical frame");
  TrajectoryWindow out = w;
  out.observed = frame.apply(w.observed);
  out.future = frame.apply(w.future);
  out.features = compute_features(out.observed, w.frame_period);
  out.frame = frame;
  return out;
}

TrajectoryWindow canonical_rotate(const TrajectoryWindow& w, bool center)
{
  return transform_window(w, canonical_frame(w, center));
}

TrajectoryWindow unrotate(const TrajectoryWindow& w)
{
  if (!w.frame)
    return w;
  TrajectoryWindow out = w;
  out.observed = w.frame->invert(w.observed);
  out.future = w.frame->invert(w.future);
  out.features = compute_features(out.observed, w.frame_period);
  out.frame.reset();
  return out;
}

MinMaxBounds compute_bounds(const std::vector<TrajectoryWindow>& windows)
{
  if (windows.empty())
    throw ContractError("bounds need at least one window");
  MinMaxBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const TrajectoryWindow& w : windows)
    for (const Matrix* m : {&w.observed, &w.future})
      for (Index i = 0; i < m->rows(); ++i) {
        b.x_min = std::min(b.x_min, (*m)(i, 0));
        b.x_max = std::max(b.x_max, (*m)(i, 0));
        b.y_min = std::min(b.y_min, (*m)(i, 1));
        b.y_max = std::max(b.y_max, (*m)(i, 1));
      }
  if (!(b.x_max > b.x_min) || !(b.y_max > b.y_min))
    throw DegeneracyError("min-max bounds are degenerate (max equals min)");
  return b;
}

TrajectoryWindow min_max_normalize(const TrajectoryWindow& w, const MinMaxBounds& bounds)
{
  if (w.bounds || w.frame)
    throw ContractError("min-max normalisation must be the first transform");
  if (!(bounds.x_max > bounds.x_min) || !(bounds.y_max > bounds.y_min))
    throw DegeneracyError("min-max bounds are degenerate (max equals min)");
  TrajectoryWindow out = w;
  out.observed = bounds.apply(w.observed);
  out.future = bounds.apply(w.future);
  out.features = compute_features(out.observed, w.frame_period);
  out.bounds = bounds;
  return out;
}

TrajectoryWindow min_max_denormalize(const TrajectoryWindow& w)
{
  if (w.frame)
    throw ContractError("undo the canonical frame before min-max denormalisation");
  if (!w.bounds)
    return w;
  TrajectoryWindow out = w;
  out.observed = w.bounds->invert(w.observed);
  out.future = w.bounds->invert(w.future);
  out.features = compute_features(out.observed, w.frame_period);
  out.bounds.reset();
  return out;
}

TrajectoryWindow scale_window(const TrajectoryWindow& w, double k)
{
  const Index n = w.observed.rows() + w.future.rows();
  Matrix mean = (w.observed.colwise().sum() + w.future.colwise().sum()) / static_cast<double>(n);
  TrajectoryWindow out = w;
  out.observed = (k * (w.observed.rowwise() - mean.row(0))).rowwise() + mean.row(0);
  out.future = (k * (w.future.rowwise() - mean.row(0))).rowwise() + mean.row(0);
  out.features = compute_features(out.observed, w.frame_period);
  return out;
}

TrajectoryWindow scale_augment(const TrajectoryWindow& w, std::mt19937_64& rng, double lo, double hi)
{
  std::uniform_real_distribution<double> u(lo, hi);
  return scale_window(w, u(rng));
}

Matrix to_displacements(const Matrix& future, const Matrix& last_observed)
{
  Matrix d(future.rows(), 2);
  for (Index s = 0; s < future.rows(); ++s)
    d.row(s) = future.row(s) - (s == 0 ? last_observed.row(0) : future.row(s - 1));
  return d;
}

Matrix from_displacements(const Matrix& displacements, const Matrix& last_observed)
{
  Matrix u(displacements.rows(), 2);
  Matrix at = last_observed.row(0);
  for (Index s = 0; s < displacements.rows(); ++s) {
    at += displacements.row(s);
    u.row(s) = at;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Synthetic processes

std::vector<TrajectoryRecord> synthesize_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                                                 std::vector<int>* turn_signs)
{
  if (spec.count < 0 || spec.length < 2 || spec.observed < 2 || spec.observed > spec.length)
    throw ContractError("invalid synthetic dataset shape");
  if (!(spec.noise >= 0.0) || !(spec.frame_period > 0.0) || !(spec.speed_max >= spec.speed_min))
    throw ContractError("invalid synthetic process parameters");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> start(-spec.extent, spec.extent);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> speed(spec.speed_min, spec.speed_max);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const double dt = spec.frame_period;
  const Index T = spec.observed - 1;

  std::vector<TrajectoryRecord> out;
  if (turn_signs)
    turn_signs->clear();
  for (Index a = 0; a < spec.count; ++a) {
    TrajectoryRecord r;
    r.scene_id = "synthetic";
    r.agent_id = std::to_string(a);
    r.frame_period = dt;
    r.positions.resize(spec.length, 2);
    const double x0 = start(rng), y0 = start(rng), h = heading(rng), v = speed(rng);
    const int sign = coin(rng) ? 1 : -1;
    if (turn_signs)
      turn_signs->push_back(sign);
    double wx = 0.0, wy = 0.0; // accumulated random walk
    double px = x0, py = y0;
    for (Index k = 0; k < spec.length; ++k) {
      r.frames.push_back(k);
      if (k <= T || spec.process == SyntheticProcess::constant_velocity) {
        px = x0 + v * std::cos(h) * dt * static_cast<double>(k);
        py = y0 + v * std::sin(h) * dt * static_cast<double>(k);
      } else {
        const double hk = h + sign * spec.turn_rate * dt * static_cast<double>(k - T);
        px += v * std::cos(hk) * dt;
        py += v * std::sin(hk) * dt;
      }
      if (k > T) {
        wx += spec.noise * gauss(rng);
        wy += spec.noise * gauss(rng);
      }
      r.positions(k, 0) = px + wx;
      r.positions(k, 1) = py + wy;
    }
    out.push_back(std::move(r));
  }
  return out;
}

GaussianMarginal constant_velocity_marginal(const TrajectoryWindow& w, double s, double noise)
{
  const Index T = w.observed.rows() - 1;
  const double vx = w.observed(T, 0) - w.observed(T - 1, 0);
  const double vy = w.observed(T, 1) - w.observed(T - 1, 1);
  return {w.observed(T, 0) + s * vx, w.observed(T, 1) + s * vy, s * noise * noise};
}

double constant_velocity_nll(Index horizon, double noise)
{
  double mean_log_s = 0.0;
  for (Index s = 1; s <= horizon; ++s)
    mean_log_s += std::log(static_cast<double>(s));
  mean_log_s /= static_cast<double>(horizon);
  return std::log(2.0 * std::numbers::pi * noise * noise) + mean_log_s + 1.0;
}

std::pair<std::vector<TrajectoryWindow>, std::vector<TrajectoryWindow>> split_windows(
  const std::vector<TrajectoryWindow>& windows, double train_fraction, std::uint64_t seed)
{
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw ContractError("train fraction must lie in [0, 1]");
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(windows.size())));
  std::pair<std::vector<TrajectoryWindow>, std::vector<TrajectoryWindow>> out;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? out.first : out.second).push_back(windows[order[i]]);
  return out;
}

} // namespace trajflow
