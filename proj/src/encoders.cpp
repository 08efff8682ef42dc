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

#include "trajflow/encoders.hpp"

#include <algorithm>

#include "trajflow/errors.hpp"

namespace trajflow {

GruParams::GruParams(Index input_dim, Index hidden_dim, Rng& rng)
  : W_ir(init_weight(input_dim, hidden_dim, rng)),
    W_iz(init_weight(input_dim, hidden_dim, rng)),
    W_in(init_weight(input_dim, hidden_dim, rng)),
    W_hr(init_weight(hidden_dim, hidden_dim, rng)),
    W_hz(init_weight(hidden_dim, hidden_dim, rng)),
    W_hn(init_weight(hidden_dim, hidden_dim, rng)),
    b_ir(Matrix::Zero(1, hidden_dim), true),
    b_iz(Matrix::Zero(1, hidden_dim), true),
    b_in(Matrix::Zero(1, hidden_dim), true),
    b_hr(Matrix::Zero(1, hidden_dim), true),
    b_hz(Matrix::Zero(1, hidden_dim), true),
    b_hn(Matrix::Zero(1, hidden_dim), true),
    input_dim(input_dim),
    hidden_dim(hidden_dim)
{
}

void GruParams::collect(ParameterList& out, const std::string& prefix)
{
  for (auto [name, t] : {std::pair{"W_ir", &W_ir}, {"W_iz", &W_iz}, {"W_in", &W_in}, {"W_hr", &W_hr},
                         {"W_hz", &W_hz}, {"W_hn", &W_hn}, {"b_ir", &b_ir}, {"b_iz", &b_iz},
                         {"b_in", &b_in}, {"b_hr", &b_hr}, {"b_hz", &b_hz}, {"b_hn", &b_hn}})
    out.push_back({prefix + "." + name, t});
}

Var gru_step(const GruParams& p, const Var& h_prev, const Var& x)
{
  if (x.cols() != p.input_dim || h_prev.cols() != p.hidden_dim || x.rows() != h_prev.rows())
    throw ContractError("gru_step: input " + shape_string(x.value()) + " / hidden " + shape_string(h_prev.value()) +
                        " do not fit a GRU with input " + std::to_string(p.input_dim) + " and hidden " +
                        std::to_string(p.hidden_dim));
  Tape& t = x.tape();
  auto affine = [&t](const Var& v, const Tensor& w, const Tensor& b) { return add(matmul(v, t.param(w)), t.param(b)); };
  Var r = sigmoid(add(affine(x, p.W_ir, p.b_ir), affine(h_prev, p.W_hr, p.b_hr)));
  Var z = sigmoid(add(affine(x, p.W_iz, p.b_iz), affine(h_prev, p.W_hz, p.b_hz)));
  Var n = tanh(add(affine(x, p.W_in, p.b_in), mul(r, affine(h_prev, p.W_hn, p.b_hn))));
  // (1 - z) * n + z * h_prev
  return add(n, mul(z, sub(h_prev, n)));
}

std::vector<Var> gru_states(Tape& tape, const GruParams& p, const InputSequence& inputs)
{
  if (inputs.empty())
    throw ContractError("gru_encode: empty observation sequence");
  Var h = tape.constant(Matrix::Zero(inputs.front().rows(), p.hidden_dim));
  std::vector<Var> states;
  states.reserve(inputs.size());
  for (const Matrix& x : inputs) {
    h = gru_step(p, h, tape.constant(x));
    states.push_back(h);
  }
  return states;
}

Var gru_encode(Tape& tape, const GruParams& p, const InputSequence& inputs)
{
  return gru_states(tape, p, inputs).back();
}

CdeParams::CdeParams(Index channels, Index hidden_dim, Index xi_width, Rng& rng)
  : W_embed(init_weight(channels, hidden_dim, rng)),
    xi({hidden_dim, xi_width, xi_width, hidden_dim * channels}, rng, false, true),
    channels(channels),
    hidden_dim(hidden_dim)
{
}

void CdeParams::collect(ParameterList& out, const std::string& prefix)
{
  out.push_back({prefix + ".W_embed", &W_embed});
  xi.collect(out, prefix + ".xi");
}

SplinePath fit_control_path(const InputSequence& inputs)
{
  if (inputs.empty())
    throw ContractError("cde_encode: empty observation sequence");
  const Index rows = inputs.front().rows();
  const Index channels = inputs.front().cols();
  Matrix values(static_cast<Index>(inputs.size()), rows * channels);
  std::vector<double> times(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].rows() != rows || inputs[k].cols() != channels)
      throw DimensionError("cde_encode: inconsistent input shapes across time steps");
    values.row(static_cast<Index>(k)) = Eigen::Map<const Matrix>(inputs[k].data(), 1, rows * channels);
    times[k] = static_cast<double>(k);
  }
  if (inputs.size() == 1) {
    // A single observation has no control signal; duplicate it so the path
    // is constant on [0, 1] and the state stays at its embedding.
    Matrix twice(2, values.cols());
    twice.row(0) = values.row(0);
    twice.row(1) = values.row(0);
    return SplinePath::fit_natural_cubic(twice, std::vector<double>{0.0, 1.0});
  }
  return SplinePath::fit_natural_cubic(values, times);
}

Var cde_state_at(Tape& tape, const CdeParams& p, const SplinePath& path, Index rows, const Var& start, double t_start,
                 double t_end, const SolverConfig& cfg)
{
  (void)tape;
  const Index v = p.channels;
  if (path.channels() != rows * v)
    throw DimensionError("cde_encode: control path has " + std::to_string(path.channels()) + " channels, expected " +
                         std::to_string(rows * v));
  FieldFn field = [&p, &path, rows, v](const Var& h, double t) {
    Matrix dc = path.eval_derivative(t);
    Var control = h.tape().constant(Eigen::Map<const Matrix>(dc.data(), rows, v));
    return row_matvec(p.xi(h), control);
  };
  // The control derivative is only C1 across knots, which hides local error
  // from the embedded estimate; integrate knot to knot so every solve sees a
  // polynomial control.
  const double direction = t_end > t_start ? 1.0 : -1.0;
  std::vector<double> stops;
  for (double knot : path.knot_times())
    if (direction * (knot - t_start) > 0.0 && direction * (t_end - knot) > 0.0)
      stops.push_back(knot);
  if (direction < 0.0)
    std::reverse(stops.begin(), stops.end());
  stops.push_back(t_end);
  Var h = start;
  double t = t_start;
  for (double stop : stops) {
    h = integrate(field, h, t, stop, cfg).state;
    t = stop;
  }
  return h;
}

Var cde_encode(Tape& tape, const CdeParams& p, const SplinePath& path, Index rows, const SolverConfig& cfg)
{
  const Index v = p.channels;
  Matrix first = path.eval(path.knot_times().front());
  Var x0 = tape.constant(Eigen::Map<const Matrix>(first.data(), rows, v));
  Var h0 = matmul(x0, tape.param(p.W_embed));
  return cde_state_at(tape, p, path, rows, h0, path.knot_times().front(), path.knot_times().back(), cfg);
}

Var cde_encode(Tape& tape, const CdeParams& p, const InputSequence& inputs, const SolverConfig& cfg)
{
  SplinePath path = fit_control_path(inputs);
  return cde_encode(tape, p, path, inputs.front().rows(), cfg);
}

} // namespace trajflow
