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

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "test_support.hpp"
#include "trajflow/data.hpp"
#include "trajflow/errors.hpp"

using namespace trajflow;
using trajflow::testing::random_matrix;

namespace {

std::vector<TrajectoryRecord> parse(const std::string& text, TrajectoryFormat format = TrajectoryFormat::generic_csv)
{
  std::istringstream in(text);
  return parse_trajectories(in, format, 0.4, {}, "scene");
}

TrajectoryRecord line_record(Index n, double vx = 1.0, double vy = 0.0)
{
  TrajectoryRecord r;
  r.scene_id = "s";
  r.agent_id = "a";
  r.frame_period = 1.0;
  r.positions.resize(n, 2);
  for (Index k = 0; k < n; ++k) {
    r.frames.push_back(k);
    r.positions(k, 0) = vx * static_cast<double>(k);
    r.positions(k, 1) = vy * static_cast<double>(k);
  }
  return r;
}

TrajectoryWindow random_window(std::mt19937_64& rng)
{
  TrajectoryWindow w;
  w.frame_period = 0.4;
  w.observed = random_matrix(8, 2, rng, -5.0, 5.0);
  w.future = random_matrix(12, 2, rng, -5.0, 5.0);
  w.features = compute_features(w.observed, w.frame_period);
  return w;
}

double max_abs(const Matrix& m)
{
  return m.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("load_trajectories")
{
  SUBCASE("header only")
  {
    CHECK(parse("scene_id,agent_id,frame,x,y\n").empty());
  }
  SUBCASE("one agent")
  {
    auto r = parse("scene_id,agent_id,frame,x,y\ns1,7,0,0.5,1\ns1,7,1,1.5,1\ns1,7,2,2.5,1.25\n");
    REQUIRE(r.size() == 1);
    CHECK(r[0].positions.rows() == 3);
    CHECK(r[0].agent_id == "7");
    CHECK(r[0].positions(2, 1) == 1.25);
    CHECK(r[0].frames == std::vector<std::int64_t>{0, 1, 2});
  }
  SUBCASE("row order does not matter")
  {
    const std::string sorted = "scene_id,agent_id,frame,x,y\na,1,0,0,0\na,1,1,1,0\na,2,5,3,3\na,2,6,4,3\nb,1,2,9,9\n";
    const std::string shuffled = "x,y,frame,agent_id,scene_id\n4,3,6,2,a\n9,9,2,1,b\n1,0,1,1,a\n3,3,5,2,a\n0,0,0,1,a\n";
    auto a = parse(sorted);
    auto b = parse(shuffled);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].scene_id == b[i].scene_id);
      CHECK(a[i].agent_id == b[i].agent_id);
      CHECK(a[i].frames == b[i].frames);
      CHECK(a[i].positions == b[i].positions);
    }
  }
  SUBCASE("errors")
  {
    try {
      parse("scene_id,agent_id,frame,x\n");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("'y'") != std::string::npos);
    }
    try {
      parse("scene_id,agent_id,frame,x,y\na,1,0,0,0\na,1,1,abc,0\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
    }
    CHECK_THROWS_AS(parse("scene_id,agent_id,frame,x,y\na,1,0,0,0\na,1,0,1,0\n"), FormatError);
    CHECK_THROWS_AS(load_trajectories("/nonexistent/file.csv", TrajectoryFormat::generic_csv, 0.4), IoError);
  }
  SUBCASE("column remapping and the whitespace format")
  {
    std::istringstream in("recordingId,trackId,frame,xCenter,yCenter,extra\n3,4,10,1.0,2.0,x\n3,4,11,1.5,2.0,x\n");
    auto r = parse_trajectories(in, TrajectoryFormat::generic_csv, 0.04, CsvColumns::ind());
    REQUIRE(r.size() == 1);
    CHECK(r[0].scene_id == "3");
    CHECK(r[0].frame_period == 0.04);
    auto e = parse("780.0\t1.0\t8.46\t3.59\n790.0\t1.0\t9.57\t3.79\n780.0\t2.0\t1.0\t1.0\n",
                   TrajectoryFormat::eth_ucy);
    REQUIRE(e.size() == 2);
    CHECK(e[0].agent_id == "1");
    CHECK(e[0].scene_id == "scene");
    CHECK(e[0].positions(1, 0) == 9.57);
  }
}

TEST_CASE("slice_windows")
{
  SlicingConfig cfg{8, 12, 1, 0, true};
  CHECK(slice_windows({line_record(21)}, cfg).size() == 2);
  CHECK(slice_windows({line_record(19)}, cfg).empty());
  for (Index n = 15; n < 40; ++n)
    CHECK(slice_windows({line_record(n)}, cfg).size() == static_cast<std::size_t>(std::max<Index>(0, n - 20 + 1)));

  SlicingConfig ind{100, 100, 1, 1000, true};
  CHECK(slice_windows({line_record(1001)}, ind).empty());
  CHECK(slice_windows({line_record(1000)}, ind).size() == 801);

  SlicingConfig eval{8, 12, 1, 0, false};
  auto w = slice_windows({line_record(12)}, eval);
  REQUIRE(w.size() == 3);
  CHECK(w[0].future_len() == 4);
  CHECK(w[2].future_len() == 2);
  CHECK(w[1].observed(0, 0) == 1.0);

  SlicingConfig stride{8, 12, 5, 0, true};
  CHECK(slice_windows({line_record(40)}, stride).size() == 5);
  CHECK_THROWS_AS((SlicingConfig{1, 12, 1, 0, true}.validate()), ConfigError);
}

TEST_CASE("compute_features")
{
  SUBCASE("straight line")
  {
    Matrix o(3, 2);
    o << 0, 0, 1, 0, 2, 0;
    Matrix f = compute_features(o, 1.0);
    for (Index t = 0; t < 3; ++t) {
      CHECK(f(t, 0) == 1.0);
      CHECK(f(t, 1) == 0.0);
      CHECK(f(t, 2) == 0.0);
      CHECK(f(t, 3) == 0.0);
      CHECK(f(t, 4) == 0.0);
    }
  }
  SUBCASE("stationary agent")
  {
    Matrix f = compute_features(Matrix::Constant(4, 2, 3.0), 0.4);
    CHECK(f.isZero(0.0));
  }
  SUBCASE("heading carried over while stopped")
  {
    Matrix o(4, 2);
    o << 0, 0, 0, 1, 0, 1, 0, 2;
    Matrix f = compute_features(o, 1.0);
    CHECK(f(2, 4) == doctest::Approx(std::numbers::pi / 2));
  }
  SUBCASE("circle")
  {
    const double step = 0.1;
    Matrix o(30, 2);
    for (Index k = 0; k < 30; ++k)
      o.row(k) << std::cos(k * step), std::sin(k * step);
    Matrix f = compute_features(o, 1.0);
    for (Index k = 2; k < 30; ++k)
      CHECK(std::abs(wrap_angle(f(k, 4) - f(k - 1, 4)) - step) <= 1e-12);
    // The chord direction lags the tangent by half a step.
    CHECK(std::abs(wrap_angle(f(5, 4) - (5 * step - step / 2 + std::numbers::pi / 2))) <= 1e-12);
  }
  SUBCASE("heading range")
  {
    Matrix o(2, 2);
    o << 0, 0, -1, 0;
    CHECK(compute_features(o, 1.0)(1, 4) == std::numbers::pi);
  }
}

TEST_CASE("canonical rotation")
{
  std::mt19937_64 rng(1);
  SUBCASE("aligned window is unchanged")
  {
    auto w = slice_windows({line_record(20)}, {8, 12, 1, 0, true}).front();
    auto r = canonical_rotate(w);
    CHECK(max_abs(r.observed - w.observed) == 0.0);
    CHECK(max_abs(r.future - w.future) == 0.0);
  }
  SUBCASE("quarter turn")
  {
    auto w = slice_windows({line_record(20, 0.0, 1.0)}, {8, 12, 1, 0, true}).front();
    auto r = canonical_rotate(w);
    CHECK(r.frame->angle == doctest::Approx(-std::numbers::pi / 2));
    // Pivot (0, 7): the next point (0, 8) lands one unit along +x from it.
    CHECK(r.future(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(r.future(0, 1) - 7.0) <= 1e-12);
    CHECK(std::abs(r.observed(7, 0)) <= 1e-12);
    auto c = canonical_rotate(w, true);
    CHECK(max_abs(c.observed.bottomRows(1)) == 0.0);
    CHECK(c.future(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("round trip and feature equivariance")
  {
    for (bool center : {false, true}) {
      TrajectoryWindow w = random_window(rng);
      auto r = canonical_rotate(w, center);
      auto back = unrotate(r);
      CHECK(max_abs(back.observed - w.observed) <= 1e-12);
      CHECK(max_abs(back.future - w.future) <= 1e-12);
      CHECK_FALSE(back.frame.has_value());
      const double a = r.frame->angle, c = std::cos(a), s = std::sin(a);
      for (Index t = 0; t < w.observed_len(); ++t) {
        for (int k : {0, 2}) {
          CHECK(std::abs(r.features(t, k) - (c * w.features(t, k) - s * w.features(t, k + 1))) <= 1e-10);
          CHECK(std::abs(r.features(t, k + 1) - (s * w.features(t, k) + c * w.features(t, k + 1))) <= 1e-10);
        }
        CHECK(std::abs(wrap_angle(r.features(t, 4) - (w.features(t, 4) + a))) <= 1e-10);
      }
      const Index T = r.observed_len() - 1;
      CHECK(std::abs(r.observed(T, 1) - r.observed(T - 1, 1)) <= 1e-12);
      CHECK(r.observed(T, 0) > r.observed(T - 1, 0));
    }
  }
  SUBCASE("degenerate last displacement")
  {
    TrajectoryWindow w = random_window(rng);
    w.observed.row(7) = w.observed.row(6);
    auto r = canonical_rotate(w);
    CHECK(r.frame->angle == 0.0);
    CHECK(max_abs(r.observed - w.observed) <= 1e-12);
  }
}

TEST_CASE("min-max normalisation")
{
  std::mt19937_64 rng(2);
  MinMaxBounds b{0.0, 10.0, -1.0, 1.0};
  Matrix p(1, 2);
  p << 5.0, 0.0;
  CHECK(b.apply(p)(0, 0) == 0.5);
  CHECK(b.apply(p)(0, 1) == 0.5);
  CHECK(b.log_jacobian() == doctest::Approx(-std::log(20.0)));

  std::vector<TrajectoryWindow> train, test;
  for (int i = 0; i < 4; ++i) {
    train.push_back(random_window(rng));
    test.push_back(random_window(rng));
  }
  test[0].observed(0, 0) = 100.0; // outside the training range
  MinMaxBounds tb = compute_bounds(train);
  auto n = min_max_normalize(test[0], tb);
  CHECK(n.observed(0, 0) == doctest::Approx((100.0 - tb.x_min) / (tb.x_max - tb.x_min)));
  CHECK(n.bounds->x_min == tb.x_min);
  auto back = min_max_denormalize(n);
  CHECK(max_abs(back.observed - test[0].observed) <= 1e-12);
  CHECK(max_abs(back.future - test[0].future) <= 1e-12);

  TrajectoryWindow flat = random_window(rng);
  flat.observed.col(1).setConstant(2.0);
  flat.future.col(1).setConstant(2.0);
  CHECK_THROWS_AS(compute_bounds({flat}), DegeneracyError);
}

TEST_CASE("scale augmentation")
{
  std::mt19937_64 rng(3);
  TrajectoryWindow w = random_window(rng);
  auto mean = [](const TrajectoryWindow& x) {
    return Matrix((x.observed.colwise().sum() + x.future.colwise().sum()) / 20.0);
  };
  auto same = scale_window(w, 1.0);
  CHECK(max_abs(same.observed - w.observed) <= 1e-12);
  for (int i = 0; i < 5; ++i) {
    auto a = scale_augment(w, rng);
    CHECK(max_abs(mean(a) - mean(w)) <= 1e-12);
  }
  auto twice = scale_window(w, 2.0);
  Matrix m = mean(w);
  CHECK(max_abs((twice.future.rowwise() - m.row(0)) - 2.0 * (w.future.rowwise() - m.row(0))) <= 1e-12);
  CHECK(max_abs(twice.features.leftCols(4) - 2.0 * w.features.leftCols(4)) <= 1e-10);
}

TEST_CASE("displacements")
{
  std::mt19937_64 rng(4);
  Matrix last(1, 2);
  last << 1.0, 2.0;
  CHECK(to_displacements(last.replicate(5, 1), last).isZero(0.0));
  Matrix u = random_matrix(12, 2, rng);
  CHECK(max_abs(from_displacements(to_displacements(u, last), last) - u) <= 1e-12);
  Matrix line(4, 2);
  for (Index s = 0; s < 4; ++s)
    line.row(s) << 1.0 + 0.5 * (s + 1), 2.0;
  Matrix d = to_displacements(line, last);
  for (Index s = 0; s < 4; ++s) {
    CHECK(d(s, 0) == doctest::Approx(0.5));
    CHECK(d(s, 1) == 0.0);
  }
}

TEST_CASE("synthetic datasets")
{
  SyntheticSpec spec;
  spec.count = 400;
  SUBCASE("noise-free constant velocity is straight")
  {
    SyntheticSpec clean = spec;
    clean.noise = 0.0;
    for (const auto& r : synthesize_dataset(clean, 5)) {
      Matrix d = r.positions.bottomRows(19) - r.positions.topRows(19);
      CHECK(max_abs(d.rowwise() - d.row(0)) <= 1e-12);
    }
  }
  SUBCASE("determinism")
  {
    auto a = synthesize_dataset(spec, 9);
    auto b = synthesize_dataset(spec, 9);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i].positions == b[i].positions);
    CHECK(synthesize_dataset(spec, 10)[0].positions != a[0].positions);
  }
  SUBCASE("noise moments")
  {
    auto windows = slice_windows(synthesize_dataset(spec, 11), {8, 12, 1, 0, true});
    REQUIRE(windows.size() == 400);
    // Future deviations from the extrapolation are a random walk; its
    // increments are i.i.d. N(0, noise^2).
    std::vector<double> inc;
    for (const auto& w : windows)
      for (Index s = 1; s <= 12; ++s) {
        auto g = constant_velocity_marginal(w, s, spec.noise);
        auto g0 = constant_velocity_marginal(w, s - 1, spec.noise);
        const Matrix prev = s == 1 ? w.last_observed() : Matrix(w.future.row(s - 2));
        inc.push_back((w.future(s - 1, 0) - g.mean_x) - (prev(0, 0) - g0.mean_x));
        inc.push_back((w.future(s - 1, 1) - g.mean_y) - (prev(0, 1) - g0.mean_y));
      }
    double var = 0.0;
    for (double v : inc)
      var += v * v;
    var /= static_cast<double>(inc.size());
    const double sd = std::sqrt(var);
    // Standard error of a sample standard deviation: sigma / sqrt(2n).
    CHECK(std::abs(sd - spec.noise) <= 3.0 * spec.noise / std::sqrt(2.0 * static_cast<double>(inc.size())));
  }
  SUBCASE("two-mode turn")
  {
    SyntheticSpec turn = spec;
    turn.process = SyntheticProcess::two_mode_turn;
    turn.noise = 0.0;
    std::vector<int> signs;
    auto windows = slice_windows(synthesize_dataset(turn, 12, &signs), {8, 12, 1, 0, true});
    int left = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      auto r = canonical_rotate(windows[i], true);
      CHECK((r.future(11, 1) > 0.0) == (signs[i] > 0));
      left += signs[i] > 0;
    }
    CHECK(left > 150);
    CHECK(left < 250);
  }
  SUBCASE("analytic NLL")
  {
    CHECK(constant_velocity_nll(1, 0.1) == doctest::Approx(std::log(2 * std::numbers::pi * 0.01) + 1.0));
  }
}

TEST_CASE("split_windows")
{
  auto windows = slice_windows({line_record(120)}, {8, 12, 1, 0, true});
  auto [train, test] = split_windows(windows, 0.75, 3);
  CHECK(train.size() + test.size() == windows.size());
  CHECK(train.size() == static_cast<std::size_t>(std::llround(0.75 * windows.size())));
  auto again = split_windows(windows, 0.75, 3);
  for (std::size_t i = 0; i < train.size(); ++i)
    CHECK(again.first[i].first_frame == train[i].first_frame);
}
