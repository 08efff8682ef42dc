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
#include "trajflow/errors.hpp"
#include "trajflow/inference.hpp"

using namespace trajflow;
using trajflow::testing::random_matrix;

namespace {

ModelConfig neutral_config(Index horizon = 4)
{
  ModelConfig cfg;
  cfg.encoder = EncoderKind::gru;
  cfg.flow = FlowKind::dnf;
  cfg.horizon = horizon;
  cfg.hidden_dim = 4;
  cfg.coupling_layers = 2;
  cfg.coupling_hidden = 4;
  cfg.preprocess.rotate = cfg.preprocess.center = false;
  return cfg;
}

TrajectoryWindow window(Index horizon = 4)
{
  SyntheticSpec spec;
  spec.count = 1;
  spec.length = 6 + horizon;
  spec.observed = 6;
  SlicingConfig sl;
  sl.obs_len = 6;
  sl.pred_len = horizon;
  return slice_windows(synthesize_dataset(spec, 3), sl).front();
}

void randomize(FlowModel& model, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  for (NamedTensor& p : model.parameters()) {
    const bool gamma = p.name.size() >= 6 && p.name.substr(p.name.size() - 6) == ".gamma";
    p.tensor->value() = random_matrix(p.tensor->rows(), p.tensor->cols(), rng, gamma ? 0.7 : -0.4, gamma ? 1.4 : 0.4);
  }
}

GridSpec grid(double half, Index n)
{
  return {-half, half, -half, half, n, n};
}

} // namespace

TEST_CASE("grid geometry")
{
  GridSpec g{0.0, 4.0, -1.0, 1.0, 4, 2};
  CHECK(g.cell_width() == 1.0);
  CHECK(g.cell_area() == 1.0);
  const Matrix c = g.centers();
  CHECK(c.rows() == 8);
  CHECK(c(0, 0) == 0.5);
  CHECK(c(0, 1) == -0.5);
  CHECK(c(5, 0) == 1.5);
  CHECK(c(5, 1) == 0.5);
  CHECK_THROWS_AS((GridSpec{0.0, 0.0, 0.0, 1.0, 4, 4}.validate()), ConfigError);
  CHECK_THROWS_AS((GridSpec{0.0, 1.0, 0.0, 1.0, 1, 4}.validate()), ConfigError);
}

TEST_CASE("density rasters")
{
  SUBCASE("identity flow gives a standard normal peaked at the origin")
  {
    FlowModel model(neutral_config());
    const OccupancyGrid g = density_raster(model, window(), 2.0, grid(5.5, 11));
    CHECK(g.kind == GridKind::density);
    Index r = 0, c = 0;
    g.values.maxCoeff(&r, &c);
    CHECK(r == 5);
    CHECK(c == 5);
    CHECK(g.values(5, 5) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK(g.values(5, 6) == doctest::Approx(std::exp(-0.5) / (2.0 * std::numbers::pi)).epsilon(1e-12));
  }
  SUBCASE("quadrature over the support is one")
  {
    FlowModel model(neutral_config());
    randomize(model, 1);
    const GridSpec spec = grid(8.0, 160);
    const OccupancyGrid g = density_raster(model, window(), 3.0, spec);
    CHECK(std::abs(g.values.sum() * spec.cell_area() - 1.0) <= 0.02);
  }
  SUBCASE("cells equal world densities at their centres")
  {
    ModelConfig cfg = neutral_config();
    cfg.preprocess = PreprocessConfig{};
    cfg.preprocess.min_max = true;
    FlowModel model(cfg);
    model.set_bounds(MinMaxBounds{-3.0, 9.0, -2.0, 4.0});
    randomize(model, 2);
    const TrajectoryWindow w = window();
    const GridSpec spec{-1.0, 3.0, 0.0, 2.0, 7, 5};
    const OccupancyGrid g = density_raster(model, w, 1.5, spec);
    const Matrix c = spec.centers();
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 7; ++j) {
        const double expected = std::exp(model.log_prob(w, c(i * 7 + j, 0), c(i * 7 + j, 1), 1.5, true));
        CHECK(std::abs(g.values(i, j) - expected) <= 1e-12 * expected);
      }
  }
}

TEST_CASE("additive fusion")
{
  std::mt19937_64 rng(5);
  SUBCASE("fused maximum is exactly one and invariant to scaling")
  {
    std::vector<Matrix> rasters;
    for (int i = 0; i < 3; ++i)
      rasters.push_back(random_matrix(4, 6, rng, 0.0, 2.0));
    const Matrix fused = fuse_rasters(rasters);
    CHECK(fused.maxCoeff() == 1.0);
    for (Matrix& r : rasters)
      r *= 7.0;
    CHECK((fuse_rasters(rasters) - fused).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("degenerate sums are rejected")
  {
    CHECK_THROWS_AS(fuse_rasters({Matrix::Zero(2, 2)}), DegeneracyError);
    CHECK_THROWS_AS(fuse_rasters({}), ContractError);
  }
  SUBCASE("a single time sample is the normalised raster")
  {
    FlowModel model(neutral_config(1));
    randomize(model, 6);
    const TrajectoryWindow w = window(1);
    const GridSpec spec = grid(3.0, 9);
    const OccupancyGrid fused = additive_fusion(model, w, 1, spec);
    const OccupancyGrid raster = density_raster(model, w, 1.0, spec);
    CHECK(fused.kind == GridKind::fused);
    CHECK(fused.values.maxCoeff() == 1.0);
    CHECK((fused.values - raster.values / raster.values.maxCoeff()).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("oversampling sums rasters at fractional times")
  {
    FlowModel model(neutral_config(2));
    randomize(model, 7);
    const TrajectoryWindow w = window(2);
    const GridSpec spec = grid(3.0, 6);
    std::vector<Matrix> rasters;
    for (int j = 1; j <= 6; ++j)
      rasters.push_back(density_raster(model, w, j / 3.0, spec).values);
    CHECK((additive_fusion(model, w, 3, spec).values - fuse_rasters(rasters)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK_THROWS_AS(additive_fusion(model, w, 0, spec), ContractError);
  }
}

TEST_CASE("top-k trajectories")
{
  FlowModel model(neutral_config());
  randomize(model, 8);
  const TrajectoryWindow w = window();
  SUBCASE("k = 1 is plain sampling")
  {
    const TopKResult r = top_k_trajectory(model, w, 1, 4, 99);
    CHECK(r.path == plain_trajectory(model, w, 4, 99));
    CHECK(r.chosen == std::vector<Index>(4, 0));
  }
  SUBCASE("the kept candidate is the most likely and the draw is seeded")
  {
    const TopKResult r = top_k_trajectory(model, w, 6, 3, 12);
    REQUIRE(r.candidate_log_prob.rows() == 3);
    for (Index s = 0; s < 3; ++s) {
      const double kept = r.candidate_log_prob(s, r.chosen[static_cast<std::size_t>(s)]);
      CHECK(kept == r.candidate_log_prob.row(s).maxCoeff());
      CHECK(kept == doctest::Approx(model.log_prob(w, r.path(s, 0), r.path(s, 1), static_cast<double>(s + 1)))
                      .epsilon(1e-10));
    }
    CHECK(top_k_trajectory(model, w, 6, 3, 12).path == r.path);
    CHECK_THROWS_AS(top_k_trajectory(model, w, 0, 3, 12), ContractError);
    CHECK_THROWS_AS(top_k_trajectory(model, w, 2, 5, 12), ContractError);
  }
  SUBCASE("selecting likely points smooths paths")
  {
    double plain = 0.0, topk = 0.0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      plain += path_roughness(top_k_trajectory(model, w, 1, 4, seed).path);
      topk += path_roughness(top_k_trajectory(model, w, 20, 4, seed).path);
    }
    CHECK(topk < plain);
  }
}

TEST_CASE("path roughness")
{
  Matrix line(4, 2);
  line << 0, 0, 1, 1, 2, 2, 3, 3;
  CHECK(path_roughness(line) == 0.0);
  Matrix kink(3, 2);
  kink << 0, 0, 1, 0, 1, 1;
  CHECK(path_roughness(kink) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("grid export")
{
  OccupancyGrid g{GridSpec{-1.0, 1.0, 0.0, 3.0, 2, 2}, GridKind::density, Matrix(2, 2)};
  g.values << 0.1, 1.0 / 3.0, std::exp(-7.25), 2.5e-300;
  SUBCASE("CSV round-trips bit-exactly")
  {
    std::stringstream ss;
    write_grid_csv(ss, g);
    const OccupancyGrid back = read_grid_csv(ss);
    CHECK(back.values == g.values);
    CHECK(back.kind == g.kind);
    CHECK(back.spec.x_min == g.spec.x_min);
    CHECK(back.spec.y_max == g.spec.y_max);
    CHECK(back.spec.resolution_x == 2);
  }
  SUBCASE("malformed CSV is rejected")
  {
    std::stringstream bad("resolution_x,resolution_y,x_min,x_max,y_min,y_max,kind\n2,2,0,1,0,1,fused\n1,2\n");
    CHECK_THROWS_AS(read_grid_csv(bad), FormatError);
    std::stringstream wrong("x,y\n");
    CHECK_THROWS_AS(read_grid_csv(wrong), FormatError);
  }
  SUBCASE("PGM header, scaling and orientation")
  {
    OccupancyGrid f{GridSpec{0.0, 3.0, 0.0, 2.0, 3, 2}, GridKind::fused, Matrix(2, 3)};
    f.values << 0.0, 0.5, 1.0, 0.25, 0.75, 0.1;
    std::stringstream ss;
    write_grid_pgm(ss, f);
    std::string magic;
    Index w = 0, h = 0, maxval = 0;
    ss >> magic >> w >> h >> maxval;
    CHECK(magic == "P2");
    CHECK(w == 3);
    CHECK(h == 2);
    CHECK(maxval == 65535);
    std::vector<long> px(6);
    for (long& p : px)
      ss >> p;
    // top image row is the upper grid row
    CHECK(px == std::vector<long>{16384, 49151, 6554, 0, 32768, 65535});
    // consistent with the CSV after scaling
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 3; ++j)
        CHECK(std::abs(static_cast<double>(px[static_cast<std::size_t>((1 - i) * 3 + j)]) / 65535.0 - f.values(i, j)) <=
              0.5 / 65535.0);
  }
  SUBCASE("unwritable paths surface the path")
  {
    try {
      export_grid(g, "/nonexistent/dir/grid.csv", GridFormat::csv);
      FAIL("expected an I/O error");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("/nonexistent/dir/grid.csv") != std::string::npos);
    }
    CHECK(parse_grid_format("pgm") == GridFormat::pgm);
    CHECK_THROWS_AS(parse_grid_format("png"), ConfigError);
  }
}
