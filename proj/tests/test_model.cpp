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
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "model_fixtures.hpp"
#include "test_support.hpp"
#include "trajflow/config_json.hpp"
#include "trajflow/errors.hpp"
#include "trajflow/model.hpp"

using namespace trajflow;
using trajflow::testing::random_matrix;
using trajflow::testing::relative_error;
using namespace trajflow::testing;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

} // namespace

TEST_CASE("configuration enums and validation")
{
  CHECK(parse_encoder_kind("gru") == EncoderKind::gru);
  CHECK(parse_flow_kind(to_string(FlowKind::cnf)) == FlowKind::cnf);
  CHECK(parse_formulation("joint") == Formulation::joint);
  CHECK_THROWS_AS(parse_encoder_kind("lstm"), ConfigError);
  CHECK_THROWS_AS(parse_flow_kind(""), ConfigError);

  ModelConfig cfg;
  CHECK(cfg.effective_train_trace() == TraceMode::exact);
  cfg.formulation = Formulation::joint;
  CHECK(cfg.flow_dim() == 24);
  CHECK(cfg.effective_train_trace() == TraceMode::hutchinson);
  cfg.train_trace = TraceMode::exact;
  CHECK(cfg.effective_train_trace() == TraceMode::exact);
  cfg.horizon = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  TrainConfig t;
  t.gamma = 1.5;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("zeroed GRU encoder yields a zero embedding")
{
  FlowModel model(small_config(EncoderKind::gru, FlowKind::dnf, Formulation::marginal));
  for (NamedTensor& p : model.parameters())
    if (p.name.rfind("encoder.", 0) == 0)
      p.tensor->value().setZero();
  const auto windows = small_windows(3, 4, 1);
  for (const auto& w : windows)
    CHECK(model.embed(w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("freshly initialised flows are the identity")
{
  for (FlowKind flow : {FlowKind::dnf, FlowKind::cnf}) {
    CAPTURE(to_string(flow));
    const auto windows = small_windows(2, 4, 2);
    {
      ModelConfig cfg = small_config(EncoderKind::gru, flow, Formulation::marginal);
      cfg.preprocess.rotate = cfg.preprocess.center = false;
      FlowModel model(cfg);
      CHECK(model.log_prob(windows[0], 0.0, 0.0, 2.0) == doctest::Approx(-kLog2Pi).epsilon(1e-12));
      CHECK(model.log_prob(windows[0], 1.0, -2.0, 1.0) == doctest::Approx(-kLog2Pi - 2.5).epsilon(1e-12));
    }
    {
      ModelConfig cfg = small_config(EncoderKind::gru, flow, Formulation::joint);
      cfg.horizon = 12;
      FlowModel model(cfg);
      const Matrix last = windows[0].last_observed();
      const Matrix still = last.replicate(12, 1); // zero displacements
      CHECK(model.log_prob_joint(windows[0], still) == doctest::Approx(-12.0 * kLog2Pi).epsilon(1e-12));
    }
  }
}

TEST_CASE("dataset NLL is the mean of per-target log densities")
{
  for (const auto& v : kVariants) {
    CAPTURE(variant_name(v));
    FlowModel model(small_config(std::get<0>(v), std::get<1>(v), std::get<2>(v)));
    randomize(model, 5);
    const auto windows = small_windows(5, 4, 7);
    // Shared adaptive steps make batched solves differ from single ones at
    // the level of the solver tolerance; the discrete GRU/DNF path is exact.
    const bool exact = std::get<0>(v) == EncoderKind::gru && std::get<1>(v) == FlowKind::dnf;
    double total = 0.0;
    Index count = 0;
    for (const auto& w : windows) {
      if (std::get<2>(v) == Formulation::marginal) {
        for (Index s = 0; s < 4; ++s, ++count)
          total -= model.log_prob(w, w.future(s, 0), w.future(s, 1), static_cast<double>(s + 1));
      } else {
        total -= model.log_prob_joint(w, w.future);
        ++count;
      }
    }
    const double expected = total / static_cast<double>(count);
    CHECK(model.nll(windows, 2) == doctest::Approx(expected).epsilon(exact ? 1e-12 : 1e-4));
  }
}

TEST_CASE("loss gradients match finite differences")
{
  for (const auto& v : kVariants) {
    CAPTURE(variant_name(v));
    ModelConfig cfg = small_config(std::get<0>(v), std::get<1>(v), std::get<2>(v));
    cfg.horizon = 3;
    pin_steps(cfg.flow_solver, 0.25);
    pin_steps(cfg.encoder_solver, 0.5);
    FlowModel model(cfg);
    randomize(model, 11);
    const auto raw = small_windows(2, 3, 13);
    std::vector<TrajectoryWindow> prepared;
    for (const auto& w : raw)
      prepared.push_back(model.prepare(w));
    const std::vector<const TrajectoryWindow*> ptrs{&prepared[0], &prepared[1]};
    auto loss = [&]() {
      Tape t;
      return model.nll_loss(t, ptrs, FlowMode::eval).scalar();
    };
    for (NamedTensor& p : model.parameters())
      p.tensor->zero_grad();
    {
      Tape tape;
      tape.backward(model.nll_loss(tape, ptrs, FlowMode::eval));
    }
    double worst = 0.0;
    std::string worst_name;
    for (NamedTensor& p : model.parameters()) {
      const Matrix analytic = p.tensor->grad();
      const Matrix numeric = trajflow::testing::numeric_gradient(loss, *p.tensor);
      const double err = relative_error(analytic, numeric, 1e-6);
      if (err > worst) {
        worst = err;
        worst_name = p.name;
      }
    }
    CAPTURE(worst_name);
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("training")
{
  const auto windows = small_windows(24, 4, 17);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.learning_rate = 1e-2;
  tc.seed = 4;
  const ModelConfig cfg = small_config(EncoderKind::gru, FlowKind::dnf, Formulation::marginal);

  SUBCASE("zero epochs leave the model untouched")
  {
    FlowModel model(cfg);
    FlowModel reference(cfg);
    tc.epochs = 0;
    const TrainResult r = train(model, windows, tc);
    CHECK(r.epoch_loss.empty());
    auto a = model.parameters(), b = reference.parameters();
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i].tensor->value() == b[i].tensor->value());
  }
  SUBCASE("identical seeds give identical runs")
  {
    FlowModel m1(cfg), m2(cfg);
    std::vector<Index> seen;
    const TrainResult r1 = train(m1, windows, tc, [&](Index e, double) { seen.push_back(e); });
    const TrainResult r2 = train(m2, windows, tc);
    REQUIRE(r1.epoch_loss.size() == 2);
    CHECK(r1.epoch_loss == r2.epoch_loss);
    CHECK(seen == std::vector<Index>{0, 1});
    CHECK(m1.nll(windows) == m2.nll(windows));
  }
  SUBCASE("loss decreases on a learnable process")
  {
    FlowModel model(cfg);
    const double before = model.nll(windows);
    tc.epochs = 15;
    train(model, windows, tc);
    CHECK(model.nll(windows) < before - 0.5);
  }
  SUBCASE("augmented CDE/CNF training runs with Hutchinson traces")
  {
    ModelConfig c = small_config(EncoderKind::cde, FlowKind::cnf, Formulation::joint);
    c.preprocess.augment = true;
    c.preprocess.min_max = true;
    FlowModel model(c);
    const TrainResult r = train(model, windows, tc);
    CHECK(r.epoch_loss.size() == 2);
    CHECK(std::isfinite(r.epoch_loss.back()));
    CHECK(model.bounds().has_value());
  }
  SUBCASE("non-finite data is reported as divergence")
  {
    auto bad = windows;
    bad[3].future(1, 0) = std::nan("");
    FlowModel model(cfg);
    CHECK_THROWS_AS(train(model, bad, tc), DivergenceError);
  }
}

TEST_CASE("preprocessing and world coordinates")
{
  ModelConfig cfg = small_config(EncoderKind::gru, FlowKind::dnf, Formulation::marginal);
  cfg.preprocess.min_max = true;
  FlowModel model(cfg);
  const auto windows = small_windows(6, 4, 19);
  CHECK_THROWS_AS(model.prepare(windows[0]), ContractError);
  model.set_bounds(compute_bounds(windows));
  randomize(model, 23);
  const TrajectoryWindow p = model.prepare(windows[0]);
  CHECK(p.last_observed().norm() <= 1e-12);
  CHECK(relative_error(model.to_world(p, p.future), windows[0].future) <= 1e-12);
  CHECK(relative_error(model.to_model(p, windows[0].future), p.future) <= 1e-12);

  const double model_lp = model.log_prob(windows[0], 1.0, 2.0, 3.0);
  const double world_lp = model.log_prob(windows[0], 1.0, 2.0, 3.0, true);
  CHECK(world_lp - model_lp == doctest::Approx(model.world_log_jacobian()).epsilon(1e-12));
  CHECK(model.world_log_jacobian() == doctest::Approx(model.bounds()->log_jacobian()));

  CHECK_THROWS_AS(model.log_prob(windows[0], 0.0, 0.0, 0.0), ContractError);
  CHECK_THROWS_AS(model.log_prob(windows[0], 0.0, 0.0, 4.5), ContractError);
  CHECK_THROWS_AS(model.log_prob_joint(windows[0], windows[0].future), ContractError);
}

TEST_CASE("sampling")
{
  const auto windows = small_windows(2, 4, 29);
  SUBCASE("marginal draws are seeded and invert the density map")
  {
    FlowModel model(small_config(EncoderKind::gru, FlowKind::dnf, Formulation::marginal));
    randomize(model, 31);
    const Matrix a = model.sample_future(windows[0], 2.0, 16, 5);
    const Matrix b = model.sample_future(windows[0], 2.0, 16, 5);
    const Matrix c = model.sample_future(windows[0], 2.0, 16, 6);
    CHECK(a == b);
    CHECK((a - c).norm() > 1e-3);
    CHECK(a.rows() == 16);
    CHECK(a.allFinite());
  }
  std::mt19937_64 rng_for_latents(43);
  for (FlowKind flow : {FlowKind::dnf, FlowKind::cnf}) {
    CAPTURE(to_string(flow));
    ModelConfig cfg = small_config(EncoderKind::gru, flow, Formulation::joint);
    cfg.flow_solver.rtol = cfg.flow_solver.atol = 1e-9;
    FlowModel model(cfg);
    randomize(model, 37);
    const Matrix traj = model.sample_joint(windows[1], 8);
    CHECK(traj.rows() == 4);
    CHECK(traj.cols() == 2);
    CHECK(traj == model.sample_joint(windows[1], 8));
    const Matrix z = model.joint_latent(windows[1], traj);
    const Matrix back = model.sample_joint_from_latent(windows[1], z);
    CHECK((back - traj).cwiseAbs().maxCoeff() <= (flow == FlowKind::dnf ? 1e-10 : 1e-6));
    const Matrix latents = random_matrix(3, 8, rng_for_latents);
    const std::vector<Matrix> batch = model.sample_joint_batch(windows[1], latents);
    REQUIRE(batch.size() == 3);
    for (Index i = 0; i < 3; ++i) {
      const Matrix single = model.sample_joint_from_latent(windows[1], latents.row(i));
      CHECK((batch[static_cast<std::size_t>(i)] - single).cwiseAbs().maxCoeff() <= (flow == FlowKind::dnf ? 1e-12 : 1e-6));
    }
  }
}

TEST_CASE("checkpoints")
{
  const auto windows = small_windows(8, 4, 41);
  for (const auto& v : kVariants) {
    CAPTURE(variant_name(v));
    ModelConfig cfg = small_config(std::get<0>(v), std::get<1>(v), std::get<2>(v));
    cfg.preprocess.min_max = true;
    cfg.train_trace = TraceMode::hutchinson;
    cfg.hutchinson_probes = 2;
    FlowModel model(cfg);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 4;
    train(model, windows, tc);

    const auto path = std::filesystem::temp_directory_path() / "trajflow_test_checkpoint.json";
    save_checkpoint(model, path.string());
    auto loaded = load_checkpoint(path.string());
    std::filesystem::remove(path);

    CHECK(checkpoint_json(*loaded) == checkpoint_json(model));
    auto a = model.parameters(), b = loaded->parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i].tensor->value() == b[i].tensor->value());
    auto ba = model.buffers(), bb = loaded->buffers();
    for (std::size_t i = 0; i < ba.size(); ++i)
      CHECK(*ba[i].value == *bb[i].value);
    CHECK(loaded->config().train_trace == cfg.train_trace);
    CHECK(loaded->nll(windows) == model.nll(windows));
  }
  SUBCASE("incompatible or malformed files are rejected")
  {
    FlowModel model(small_config(EncoderKind::gru, FlowKind::dnf, Formulation::marginal));
    Json j = Json::parse(checkpoint_json(model));
    Json wrong_version = j;
    wrong_version["version"] = 2;
    CHECK_THROWS_AS(checkpoint_from_json(wrong_version.dump()), VersionError);
    Json missing = j;
    missing["parameters"].erase(missing["parameters"].begin());
    CHECK_THROWS_AS(checkpoint_from_json(missing.dump()), VersionError);
    Json reshaped = j;
    reshaped["model"]["hidden_dim"] = 5;
    CHECK_THROWS_AS(checkpoint_from_json(reshaped.dump()), VersionError);
    CHECK_THROWS_AS(checkpoint_from_json("{not json"), FormatError);
    CHECK_THROWS_AS(checkpoint_from_json("{\"format\": \"other\"}"), FormatError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/trajflow.json"), IoError);
  }
}
