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

#include "trajflow/odeint.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "trajflow/errors.hpp"

namespace trajflow {

void SolverConfig::validate() const
{
  if (!(rtol > 0.0) || !(atol > 0.0))
    throw ContractError("solver tolerances must be positive");
  if (max_steps < 1)
    throw ContractError("solver max_steps must be at least 1");
  if (!(safety_factor > 0.0 && safety_factor <= 1.0))
    throw ContractError("solver safety factor must lie in (0, 1]");
  if (!(min_factor > 0.0 && min_factor < 1.0 && max_factor > 1.0))
    throw ContractError("solver step factor clamp must straddle 1");
}

namespace {

// Dormand & Prince (1980) tableau.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
const std::array<std::vector<double>, 7> kA{{
  {},
  {1.0 / 5},
  {3.0 / 40, 9.0 / 40},
  {44.0 / 45, -56.0 / 15, 32.0 / 9},
  {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
  {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
  {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
}};
// Fifth-order minus embedded fourth-order weights.
constexpr std::array<double, 7> kE{71.0 / 57600,  0.0,         -71.0 / 16695, 71.0 / 1920,
                                   -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

void check_finite(const Var& k, double t)
{
  if (!k.value().allFinite())
    throw NumericError("vector field returned a non-finite value at t = " + std::to_string(t));
}

Var eval_field(const FieldFn& field, const Var& h, double t, std::size_t& evaluations)
{
  Var k = field(h, t);
  ++evaluations;
  if (k.rows() != h.rows() || k.cols() != h.cols())
    throw DimensionError("vector field output " + shape_string(k.value()) + " does not match state " +
                         shape_string(h.value()));
  check_finite(k, t);
  return k;
}

double rms_norm(const Matrix& x, const Matrix& scale)
{
  return std::sqrt((x.array() / scale.array()).square().mean());
}

// One Dormand-Prince step. Returns the 5th-order state; k holds the stages
// (k[6] is the derivative at the new state).
Var dopri_step(const FieldFn& field, const Var& h, const Var& k1, double t, double dt, std::array<Var, 7>& k,
               std::size_t& evaluations)
{
  k[0] = k1;
  Var y;
  for (int s = 1; s < 7; ++s) {
    std::vector<Var> terms{h};
    std::vector<double> weights{1.0};
    for (int j = 0; j < s; ++j) {
      if (kA[s][j] == 0.0)
        continue;
      terms.push_back(k[j]);
      weights.push_back(dt * kA[s][j]);
    }
    y = weighted_sum(terms, weights);
    k[s] = eval_field(field, y, t + kC[s] * dt, evaluations);
  }
  return y; // stage 7 input equals the fifth-order solution
}

double initial_step(const FieldFn& field, const Var& h0, const Var& f0, double t0, double direction,
                    double span, const SolverConfig& cfg, std::size_t& evaluations)
{
  const Matrix& y0 = h0.value();
  Matrix scale = (cfg.atol + cfg.rtol * y0.array().abs()).matrix();
  const double d0 = rms_norm(y0, scale);
  const double d1 = rms_norm(f0.value(), scale);
  // The probe step stays inside the interval: fields such as spline-driven
  // ones are undefined beyond it.
  double step0 = std::min(span, (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1);

  Tape& tape = h0.tape();
  const std::size_t mark = tape.mark();
  Var y1 = weighted_sum({h0, f0}, {1.0, direction * step0});
  Var f1 = eval_field(field, y1, t0 + direction * step0, evaluations);
  const double d2 = rms_norm(f1.value() - f0.value(), scale) / step0;
  tape.rewind(mark);

  const double dmax = std::max(d1, d2);
  const double step1 = dmax <= 1e-15 ? std::max(1e-6, step0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
  return std::min(100.0 * step0, step1);
}

} // namespace

Solution integrate(const FieldFn& field, const Var& h0, double t0, double t1, const SolverConfig& cfg)
{
  cfg.validate();
  if (t0 == t1)
    throw ContractError("integration interval is empty");
  if (!h0.value().allFinite())
    throw NumericError("initial state is not finite");

  Tape& tape = h0.tape();
  const bool keep = tape.recording();
  const double direction = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  Solution sol;
  Var h = h0;
  Var f = eval_field(field, h, t0, sol.evaluations);
  double step = cfg.initial_step > 0.0 ? cfg.initial_step
                                       : initial_step(field, h, f, t0, direction, span, cfg, sol.evaluations);
  step = std::min(step, span);

  // Bookkeeping for non-recording tapes: everything after `base` is scratch.
  const std::size_t base = tape.mark();
  double t = t0;
  std::size_t attempts = 0;
  std::array<Var, 7> k;

  while (direction * (t1 - t) > 0.0) {
    if (attempts++ >= cfg.max_steps)
      throw NonConvergenceError("solver exceeded " + std::to_string(cfg.max_steps) + " steps; reached t = " +
                                  std::to_string(t),
                                t);
    double remaining = std::abs(t1 - t);
    bool last = false;
    if (step >= remaining) {
      step = remaining;
      last = true;
    }
    if (step <= 1e-14 * std::max(1.0, std::abs(t)))
      throw NonConvergenceError("step size underflow at t = " + std::to_string(t), t);

    const double dt = direction * step;
    const std::size_t mark = tape.mark();
    Var y = dopri_step(field, h, f, t, dt, k, sol.evaluations);

    Matrix err = Matrix::Zero(h.rows(), h.cols());
    for (int s = 0; s < 7; ++s)
      if (kE[s] != 0.0)
        err.noalias() += (dt * kE[s]) * k[s].value();
    Matrix scale = (cfg.atol + cfg.rtol * h.value().array().abs().max(y.value().array().abs())).matrix();
    const double norm = rms_norm(err, scale);

    const double factor =
      norm == 0.0 ? cfg.max_factor
                  : std::clamp(cfg.safety_factor * std::pow(norm, -1.0 / 5.0), cfg.min_factor, cfg.max_factor);
    if (!std::isfinite(norm) || norm > 1.0) {
      tape.rewind(mark);
      ++sol.rejected;
      step *= std::isfinite(norm) ? std::min(1.0, factor) : cfg.min_factor;
      continue;
    }

    t = last ? t1 : t + dt;
    if (keep) {
      h = y;
      f = k[6];
      sol.steps.push_back({t, dt, h});
    } else {
      Matrix hv = y.value();
      Matrix fv = k[6].value();
      tape.rewind(base);
      h = tape.constant(std::move(hv));
      f = tape.constant(std::move(fv));
      sol.steps.push_back({t, dt, Var{}});
    }
    step *= factor;
  }
  sol.state = h;
  return sol;
}

Matrix integrate_values(const FieldFn& field, const Matrix& h0, double t0, double t1, const SolverConfig& cfg)
{
  Tape tape(false);
  Var h = tape.constant(h0);
  return integrate(field, h, t0, t1, cfg).state.value();
}

Var integrate_fixed(const FieldFn& field, const Var& h0, double t0, double t1, std::size_t n_steps)
{
  if (n_steps == 0)
    throw ContractError("fixed-step integration needs at least one step");
  const double dt = (t1 - t0) / static_cast<double>(n_steps);
  std::size_t evaluations = 0;
  std::array<Var, 7> k;
  Var h = h0;
  Var f = eval_field(field, h, t0, evaluations);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = t0 + static_cast<double>(i) * dt;
    h = dopri_step(field, h, f, t, dt, k, evaluations);
    f = k[6];
  }
  return h;
}

AugmentedSolution integrate_augmented(const AugmentedFieldFn& field, const Var& h0, const Var& logp0, double t0,
                                      double t1, const SolverConfig& cfg)
{
  if (logp0.rows() != h0.rows() || logp0.cols() != 1)
    throw DimensionError("log-density state must be rows x 1, got " + shape_string(logp0.value()));
  const Index dim = h0.cols();
  FieldFn joined = [&field, dim](const Var& state, double t) {
    auto [dh, dlogp] = field(slice_cols(state, 0, dim), t);
    return hcat({dh, dlogp});
  };
  AugmentedSolution out;
  out.solution = integrate(joined, hcat({h0, logp0}), t0, t1, cfg);
  out.state = slice_cols(out.solution.state, 0, dim);
  out.logp = slice_cols(out.solution.state, dim, 1);
  return out;
}

AdjointGradients adjoint_gradients(const VectorField& field, const Matrix& h1, double t0, double t1,
                                   const Matrix& dL_dh1, const SolverConfig& cfg)
{
  if (dL_dh1.rows() != h1.rows() || dL_dh1.cols() != h1.cols())
    throw DimensionError("adjoint seed " + shape_string(dL_dh1) + " does not match state " + shape_string(h1));
  const Index rows = h1.rows(), cols = h1.cols();
  const Index n = rows * cols;
  std::vector<Index> offsets;
  Index total = 2 * n;
  for (const Tensor* p : field.params) {
    offsets.push_back(total);
    total += p->size();
  }

  // Augmented state is a single row [h | a | dL/dtheta].
  FieldFn augmented = [&](const Var& state, double t) {
    const Matrix& z = state.value();
    Tape inner(true);
    inner.set_param_sink(false);
    std::vector<Var> bound;
    for (const Tensor* p : field.params)
      bound.push_back(inner.param(*p));
    Tensor h(Eigen::Map<const Matrix>(z.data(), rows, cols), true);
    Var hv = inner.param(h);
    Var f = field.eval(hv, t);
    Matrix a = Eigen::Map<const Matrix>(z.data() + n, rows, cols);
    inner.backward(f, a);

    Matrix dz = Matrix::Zero(1, total);
    Eigen::Map<Matrix>(dz.data(), rows, cols) = f.value();
    const Matrix& gh = inner.grad(hv);
    if (gh.size() != 0)
      Eigen::Map<Matrix>(dz.data() + n, rows, cols) = -gh;
    for (std::size_t i = 0; i < bound.size(); ++i) {
      const Matrix& gp = inner.grad(bound[i]);
      if (gp.size() != 0)
        Eigen::Map<Matrix>(dz.data() + offsets[i], gp.rows(), gp.cols()) = -gp;
    }
    return state.tape().constant(std::move(dz));
  };

  Matrix z1 = Matrix::Zero(1, total);
  Eigen::Map<Matrix>(z1.data(), rows, cols) = h1;
  Eigen::Map<Matrix>(z1.data() + n, rows, cols) = dL_dh1;
  Matrix z0 = integrate_values(augmented, z1, t1, t0, cfg);

  AdjointGradients out;
  out.h0 = Eigen::Map<const Matrix>(z0.data(), rows, cols);
  out.dL_dh0 = Eigen::Map<const Matrix>(z0.data() + n, rows, cols);
  for (std::size_t i = 0; i < field.params.size(); ++i) {
    const Tensor* p = field.params[i];
    out.dL_dparams.push_back(Eigen::Map<const Matrix>(z0.data() + offsets[i], p->rows(), p->cols()));
  }
  return out;
}

} // namespace trajflow
