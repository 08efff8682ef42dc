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

#include "trajflow/flows.hpp"

#include <cmath>
#include <numbers>

#include "trajflow/errors.hpp"

namespace trajflow {

namespace {

void check_condition(const Var& x, const FlowCondition& cond, const char* where)
{
  if (cond.zeta.rows() != x.rows() || cond.s.rows() != x.rows() || cond.s.cols() != 1)
    throw DimensionError(std::string(where) + ": condition (" + shape_string(cond.zeta.value()) + ", " +
                         shape_string(cond.s.value()) + ") does not match batch " + shape_string(x.value()));
}

void check_dim(const Var& x, Index dim, const char* where)
{
  if (x.cols() != dim)
    throw DimensionError(std::string(where) + ": expected " + std::to_string(dim) + " columns, got " +
                         shape_string(x.value()));
}

Var zeros_column(Tape& tape, Index rows)
{
  return tape.constant(Matrix::Zero(rows, 1));
}

} // namespace

Var standard_normal_log_prob(const Var& z)
{
  const double c = -0.5 * static_cast<double>(z.cols()) * std::log(2.0 * std::numbers::pi);
  return add_scalar(scale(row_sum(square(z)), -0.5), c);
}

// ---------------------------------------------------------------------------
// Moving-average batch norm

MovingAvgBatchNorm::MovingAvgBatchNorm(Index dim)
  : gamma(Matrix::Ones(1, dim), true),
    beta(Matrix::Zero(1, dim), true),
    running_mean(Matrix::Zero(1, dim)),
    running_std(Matrix::Ones(1, dim))
{
}

void MovingAvgBatchNorm::check_degenerate() const
{
  if ((gamma.value().array().abs() < eps).any())
    throw DegeneracyError("batch norm scale has an entry below " + std::to_string(eps) + " in magnitude");
  if ((running_std.array() < eps).any())
    throw DegeneracyError("batch norm running std has an entry below " + std::to_string(eps));
}

Var MovingAvgBatchNorm::log_det(Tape& tape, Index rows) const
{
  // sum_i log|gamma_i| - log sigma_i, the same for every row.
  Var g = tape.param(gamma);
  Var ld = scale(sum(log(square(g))), 0.5);
  ld = add_scalar(ld, -running_std.array().log().sum());
  return add(zeros_column(tape, rows), ld);
}

FlowResult MovingAvgBatchNorm::forward(const Var& x, FlowMode mode)
{
  check_dim(x, dim(), "batch norm");
  if (mode == FlowMode::train && x.rows() > 1) {
    const Matrix& v = x.value();
    Matrix mu = v.colwise().mean();
    Matrix centered = v.rowwise() - mu.row(0);
    Matrix sd = (centered.array().square().colwise().mean() + eps).sqrt().matrix();
    running_mean = (1.0 - momentum) * running_mean + momentum * mu;
    running_std = (1.0 - momentum) * running_std + momentum * sd;
  }
  check_degenerate();
  Tape& tape = x.tape();
  Matrix inv_sd = running_std.cwiseInverse();
  Var normed = mul(sub(x, tape.constant(running_mean)), tape.constant(inv_sd));
  Var y = add(mul(normed, tape.param(gamma)), tape.param(beta));
  return {y, log_det(tape, x.rows())};
}

FlowResult MovingAvgBatchNorm::inverse(const Var& y) const
{
  check_dim(y, dim(), "batch norm");
  check_degenerate();
  Tape& tape = y.tape();
  Var g = tape.param(gamma);
  Var normed = mul(sub(y, tape.param(beta)), exp(scale(log(square(g)), -0.5)));
  // Restore the sign of gamma: (y - beta) / gamma = (y - beta) * sign / |gamma|.
  Matrix sign = gamma.value().unaryExpr([](double v) { return v < 0.0 ? -1.0 : 1.0; });
  normed = mul(normed, tape.constant(sign));
  Var x = add(mul(normed, tape.constant(running_std)), tape.constant(running_mean));
  return {x, neg(log_det(tape, y.rows()))};
}

void MovingAvgBatchNorm::collect(ParameterList& out, const std::string& prefix)
{
  out.push_back({prefix + ".gamma", &gamma});
  out.push_back({prefix + ".beta", &beta});
}

void MovingAvgBatchNorm::collect_buffers(BufferList& out, const std::string& prefix)
{
  out.push_back({prefix + ".running_mean", &running_mean});
  out.push_back({prefix + ".running_std", &running_std});
}

// ---------------------------------------------------------------------------
// Affine coupling

CouplingLayer::CouplingLayer(Index dim, Index cond_dim, Index hidden, bool odd, Rng& rng)
  : dim(dim), split(dim / 2), odd(odd)
{
  if (dim < 2)
    throw ContractError("coupling layer needs at least two dimensions");
  const Index pass = odd ? dim - split : split;
  const Index in = pass + cond_dim + 1;
  const Index out = dim - pass;
  scale_net = Mlp({in, hidden, hidden, out}, rng, true);
  shift_net = Mlp({in, hidden, hidden, out}, rng, true);
}

Var CouplingLayer::conditioner_input(const Var& pass, const FlowCondition& cond) const
{
  return hcat({pass, cond.zeta, cond.s});
}

FlowResult CouplingLayer::forward(const Var& x, const FlowCondition& cond) const
{
  check_dim(x, dim, "coupling layer");
  check_condition(x, cond, "coupling layer");
  const Index pass_n = odd ? dim - split : split;
  const Index pass_at = odd ? dim - pass_n : 0;
  const Index change_at = odd ? 0 : pass_n;
  Var pass = slice_cols(x, pass_at, pass_n);
  Var change = slice_cols(x, change_at, dim - pass_n);
  Var in = conditioner_input(pass, cond);
  Var s = scale_net(in);
  Var t = shift_net(in);
  Var y = add(mul(change, exp(s)), t);
  Var out = odd ? hcat({y, pass}) : hcat({pass, y});
  return {out, row_sum(s)};
}

FlowResult CouplingLayer::inverse(const Var& y, const FlowCondition& cond) const
{
  check_dim(y, dim, "coupling layer");
  check_condition(y, cond, "coupling layer");
  const Index pass_n = odd ? dim - split : split;
  const Index pass_at = odd ? dim - pass_n : 0;
  const Index change_at = odd ? 0 : pass_n;
  Var pass = slice_cols(y, pass_at, pass_n);
  Var change = slice_cols(y, change_at, dim - pass_n);
  Var in = conditioner_input(pass, cond);
  Var s = scale_net(in);
  Var t = shift_net(in);
  Var x = mul(sub(change, t), exp(neg(s)));
  Var out = odd ? hcat({x, pass}) : hcat({pass, x});
  return {out, neg(row_sum(s))};
}

void CouplingLayer::collect(ParameterList& out, const std::string& prefix)
{
  scale_net.collect(out, prefix + ".scale");
  shift_net.collect(out, prefix + ".shift");
}

// ---------------------------------------------------------------------------
// Discrete flow

DiscreteFlow::DiscreteFlow(const DiscreteFlowConfig& cfg, Rng& rng) : input_norm(cfg.dim)
{
  if (cfg.layers < 1)
    throw ContractError("discrete flow needs at least one coupling layer");
  for (Index k = 0; k < cfg.layers; ++k) {
    couplings.emplace_back(cfg.dim, cfg.cond_dim, cfg.hidden, k % 2 == 1, rng);
    norms.emplace_back(cfg.dim);
  }
}

FlowResult DiscreteFlow::forward(const Var& x, const FlowCondition& cond, FlowMode mode)
{
  FlowResult r = input_norm.forward(x, mode);
  std::vector<Var> logdets{r.logdet};
  Var h = r.value;
  for (std::size_t k = 0; k < couplings.size(); ++k) {
    FlowResult c = couplings[k].forward(h, cond);
    FlowResult n = norms[k].forward(c.value, mode);
    logdets.push_back(c.logdet);
    logdets.push_back(n.logdet);
    h = n.value;
  }
  return {h, weighted_sum(logdets, std::vector<double>(logdets.size(), 1.0))};
}

FlowResult DiscreteFlow::inverse(const Var& z, const FlowCondition& cond) const
{
  std::vector<Var> logdets;
  Var h = z;
  for (std::size_t k = couplings.size(); k-- > 0;) {
    FlowResult n = norms[k].inverse(h);
    FlowResult c = couplings[k].inverse(n.value, cond);
    logdets.push_back(n.logdet);
    logdets.push_back(c.logdet);
    h = c.value;
  }
  FlowResult r = input_norm.inverse(h);
  logdets.push_back(r.logdet);
  return {r.value, weighted_sum(logdets, std::vector<double>(logdets.size(), 1.0))};
}

Var DiscreteFlow::log_prob(const Var& x, const FlowCondition& cond, FlowMode mode)
{
  FlowResult r = forward(x, cond, mode);
  return add(standard_normal_log_prob(r.value), r.logdet);
}

void DiscreteFlow::collect(ParameterList& out, const std::string& prefix)
{
  input_norm.collect(out, prefix + ".norm_in");
  for (std::size_t k = 0; k < couplings.size(); ++k) {
    couplings[k].collect(out, prefix + ".coupling" + std::to_string(k));
    norms[k].collect(out, prefix + ".norm" + std::to_string(k));
  }
}

void DiscreteFlow::collect_buffers(BufferList& out, const std::string& prefix)
{
  input_norm.collect_buffers(out, prefix + ".norm_in");
  for (std::size_t k = 0; k < norms.size(); ++k)
    norms[k].collect_buffers(out, prefix + ".norm" + std::to_string(k));
}

// ---------------------------------------------------------------------------
// FiLM layers and the continuous flow field

FilmLayer::FilmLayer(Index in, Index out, Index cond_dim, Rng& rng, bool zero_output)
  : main(in, out, rng, zero_output),
    W_t(init_weight(1, out, rng)),
    W_s(init_weight(1, out, rng)),
    W_c(init_weight(cond_dim, out, rng)),
    b_t(Matrix::Zero(1, out), true),
    W_bt(zero_output ? Tensor(Matrix::Zero(1, out), true) : init_weight(1, out, rng)),
    W_bs(zero_output ? Tensor(Matrix::Zero(1, out), true) : init_weight(1, out, rng)),
    W_bc(zero_output ? Tensor(Matrix::Zero(cond_dim, out), true) : init_weight(cond_dim, out, rng)),
    b_bt(Matrix::Zero(1, out), true)
{
}

FilmLayer::Static FilmLayer::precompute(const FlowCondition& cond) const
{
  Tape& tape = cond.zeta.tape();
  Var gate = add(add(matmul(cond.zeta, tape.param(W_c)), matmul(cond.s, tape.param(W_s))), tape.param(b_t));
  Var bias = add(add(matmul(cond.zeta, tape.param(W_bc)), matmul(cond.s, tape.param(W_bs))), tape.param(b_bt));
  return {gate, bias};
}

std::pair<Var, Var> FilmLayer::apply(const Var& x, double t, const Static& st) const
{
  Tape& tape = x.tape();
  Var g = sigmoid(add(st.gate, scale(tape.param(W_t), t)));
  Var y = add(mul(main(x), g), add(st.bias, scale(tape.param(W_bt), t)));
  return {y, g};
}

void FilmLayer::collect(ParameterList& out, const std::string& prefix)
{
  main.collect(out, prefix + ".main");
  for (auto [name, p] : {std::pair{"W_t", &W_t}, {"W_s", &W_s}, {"W_c", &W_c}, {"b_t", &b_t}, {"W_bt", &W_bt},
                         {"W_bs", &W_bs}, {"W_bc", &W_bc}, {"b_bt", &b_bt}})
    out.push_back({prefix + "." + name, p});
}

Var film_apply(const FilmLayer& layer, const Var& x, const FlowCondition& cond, double t)
{
  check_condition(x, cond, "film layer");
  return layer.apply(x, t, layer.precompute(cond)).first;
}

CnfField::CnfField(Index dim, Index cond_dim, Index hidden, Index depth, Rng& rng)
{
  if (depth < 1)
    throw ContractError("flow field needs at least one layer");
  for (Index l = 0; l < depth; ++l) {
    const Index in = l == 0 ? dim : hidden;
    const Index out = l + 1 == depth ? dim : hidden;
    layers.emplace_back(in, out, cond_dim, rng, l + 1 == depth);
  }
}

std::vector<FilmLayer::Static> CnfField::precompute(const FlowCondition& cond) const
{
  std::vector<FilmLayer::Static> st;
  st.reserve(layers.size());
  for (const FilmLayer& l : layers)
    st.push_back(l.precompute(cond));
  return st;
}

std::pair<Var, std::vector<Var>> CnfField::evaluate(const Var& x, double t, const std::vector<FilmLayer::Static>& st,
                                                    const std::vector<Var>& tangents) const
{
  Tape& tape = x.tape();
  Var a = x;
  std::vector<Var> v = tangents;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto [y, g] = layers[l].apply(a, t, st[l]);
    Var w = tape.param(layers[l].main.weight);
    for (Var& vi : v)
      vi = mul(matmul(vi, w), g);
    a = y;
    if (l + 1 < layers.size()) {
      a = tanh(a);
      if (!v.empty()) {
        Var d = add_scalar(neg(square(a)), 1.0);
        for (Var& vi : v)
          vi = mul(vi, d);
      }
    }
  }
  return {a, v};
}

void CnfField::collect(ParameterList& out, const std::string& prefix)
{
  for (std::size_t l = 0; l < layers.size(); ++l)
    layers[l].collect(out, prefix + ".film" + std::to_string(l));
}

namespace {

std::vector<Var> basis_tangents(Tape& tape, Index rows, Index dim)
{
  std::vector<Var> v;
  for (Index j = 0; j < dim; ++j) {
    Matrix e = Matrix::Zero(rows, dim);
    e.col(j).setOnes();
    v.push_back(tape.constant(std::move(e)));
  }
  return v;
}

Var trace_from_tangents(const std::vector<Var>& jv, const std::vector<Var>& probes, TraceMode mode)
{
  std::vector<Var> terms;
  if (mode == TraceMode::exact) {
    for (std::size_t j = 0; j < jv.size(); ++j)
      terms.push_back(slice_cols(jv[j], static_cast<Index>(j), 1));
    return weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
  }
  for (std::size_t k = 0; k < jv.size(); ++k)
    terms.push_back(row_sum(mul(probes[k], jv[k])));
  return weighted_sum(terms, std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())));
}

std::vector<Var> probe_tangents(Tape& tape, const Var& x, TraceMode mode, const std::vector<Matrix>& probes)
{
  if (mode == TraceMode::exact)
    return basis_tangents(tape, x.rows(), x.cols());
  if (probes.empty())
    throw ContractError("Hutchinson trace needs at least one probe");
  std::vector<Var> v;
  for (const Matrix& p : probes) {
    if (p.rows() != x.rows() || p.cols() != x.cols())
      throw DimensionError("probe " + shape_string(p) + " does not match state " + shape_string(x.value()));
    v.push_back(tape.constant(p));
  }
  return v;
}

} // namespace

Var trace_jacobian(const CnfField& field, const Var& x, const std::vector<FilmLayer::Static>& st, double t,
                   TraceMode mode, const std::vector<Matrix>& probes)
{
  Tape& tape = x.tape();
  std::vector<Var> tangents = probe_tangents(tape, x, mode, probes);
  auto [f, jv] = field.evaluate(x, t, st, tangents);
  return trace_from_tangents(jv, tangents, mode);
}

std::vector<Matrix> rademacher_probes(Index rows, Index dim, Index count, Rng& rng)
{
  std::bernoulli_distribution coin(0.5);
  std::vector<Matrix> out;
  for (Index k = 0; k < count; ++k) {
    Matrix m(rows, dim);
    for (Index i = 0; i < m.size(); ++i)
      m.data()[i] = coin(rng) ? 1.0 : -1.0;
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Continuous flow

ContinuousFlow::ContinuousFlow(const ContinuousFlowConfig& cfg, Rng& rng)
  : input_norm(cfg.dim),
    field(cfg.dim, cfg.cond_dim, cfg.hidden, cfg.depth, rng),
    output_norm(cfg.dim),
    trace(cfg.trace),
    probes(cfg.probes)
{
  if (cfg.trace == TraceMode::hutchinson && cfg.probes < 1)
    throw ContractError("Hutchinson trace needs at least one probe");
}

FlowResult ContinuousFlow::forward(const Var& x, const FlowCondition& cond, FlowMode mode, const SolverConfig& solver,
                                   Rng& probe_rng)
{
  check_condition(x, cond, "continuous flow");
  FlowResult pre = input_norm.forward(x, mode);
  Tape& tape = x.tape();
  const std::vector<FilmLayer::Static> st = field.precompute(cond);
  std::vector<Matrix> probe_values;
  if (trace == TraceMode::hutchinson)
    probe_values = rademacher_probes(x.rows(), dim(), probes, probe_rng);
  const TraceMode tm = trace;
  AugmentedFieldFn aug = [this, &st, &probe_values, tm](const Var& h, double t) {
    std::vector<Var> tangents = probe_tangents(h.tape(), h, tm, probe_values);
    auto [f, jv] = field.evaluate(h, t, st, tangents);
    return std::pair{f, neg(trace_from_tangents(jv, tangents, tm))};
  };
  AugmentedSolution sol = integrate_augmented(aug, pre.value, zeros_column(tape, x.rows()), 0.0, 1.0, solver);
  FlowResult post = output_norm.forward(sol.state, mode);
  // log p(x) = log p(z) + log|det| where the ODE contributes +int tr J,
  // i.e. minus the integrated d log p.
  return {post.value, weighted_sum({pre.logdet, sol.logp, post.logdet}, {1.0, -1.0, 1.0})};
}

Var ContinuousFlow::inverse(const Var& z, const FlowCondition& cond, const SolverConfig& solver) const
{
  check_condition(z, cond, "continuous flow");
  FlowResult post = output_norm.inverse(z);
  const std::vector<FilmLayer::Static> st = field.precompute(cond);
  FieldFn f = [this, &st](const Var& h, double t) { return field.evaluate(h, t, st, {}).first; };
  Var x = integrate(f, post.value, 1.0, 0.0, solver).state;
  return input_norm.inverse(x).value;
}

Var ContinuousFlow::log_prob(const Var& x, const FlowCondition& cond, FlowMode mode, const SolverConfig& solver,
                             Rng& probe_rng)
{
  FlowResult r = forward(x, cond, mode, solver, probe_rng);
  return add(standard_normal_log_prob(r.value), r.logdet);
}

void ContinuousFlow::collect(ParameterList& out, const std::string& prefix)
{
  input_norm.collect(out, prefix + ".norm_in");
  field.collect(out, prefix + ".field");
  output_norm.collect(out, prefix + ".norm_out");
}

void ContinuousFlow::collect_buffers(BufferList& out, const std::string& prefix)
{
  input_norm.collect_buffers(out, prefix + ".norm_in");
  output_norm.collect_buffers(out, prefix + ".norm_out");
}

} // namespace trajflow
