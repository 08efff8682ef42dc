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

#include "trajflow/config_json.hpp"

#include "trajflow/errors.hpp"

namespace trajflow {

using namespace config_fields;

Json to_json(const SolverConfig& c)
{
  return {{"rtol", c.rtol},
          {"atol", c.atol},
          {"initial_step", c.initial_step},
          {"max_steps", c.max_steps},
          {"safety_factor", c.safety_factor},
          {"min_factor", c.min_factor},
          {"max_factor", c.max_factor}};
}

void read_json(const Json& j, const std::string& path, SolverConfig& c, ConfigErrors& errors)
{
  read_object(j, path,
              {{"rtol", real(c.rtol, errors)},
               {"atol", real(c.atol, errors)},
               {"initial_step", real(c.initial_step, errors)},
               {"max_steps", unsigned_integer(c.max_steps, errors)},
               {"safety_factor", real(c.safety_factor, errors)},
               {"min_factor", real(c.min_factor, errors)},
               {"max_factor", real(c.max_factor, errors)}},
              errors);
}

Json to_json(const PreprocessConfig& c)
{
  return {{"rotate", c.rotate},   {"center", c.center},           {"min_max", c.min_max},
          {"augment", c.augment}, {"augment_min", c.augment_min}, {"augment_max", c.augment_max}};
}

void read_json(const Json& j, const std::string& path, PreprocessConfig& c, ConfigErrors& errors)
{
  read_object(j, path,
              {{"rotate", boolean(c.rotate, errors)},
               {"center", boolean(c.center, errors)},
               {"min_max", boolean(c.min_max, errors)},
               {"augment", boolean(c.augment, errors)},
               {"augment_min", real(c.augment_min, errors)},
               {"augment_max", real(c.augment_max, errors)}},
              errors);
}

Json to_json(const ModelConfig& c)
{
  std::string trace = "auto";
  if (c.train_trace)
    trace = *c.train_trace == TraceMode::exact ? "exact" : "hutchinson";
  return {{"encoder", to_string(c.encoder)},
          {"flow", to_string(c.flow)},
          {"formulation", to_string(c.formulation)},
          {"horizon", c.horizon},
          {"hidden_dim", c.hidden_dim},
          {"cde_width", c.cde_width},
          {"coupling_layers", c.coupling_layers},
          {"coupling_hidden", c.coupling_hidden},
          {"cnf_hidden", c.cnf_hidden},
          {"cnf_depth", c.cnf_depth},
          {"train_trace", trace},
          {"hutchinson_probes", c.hutchinson_probes},
          {"norm_momentum", c.norm_momentum},
          {"flow_solver", to_json(c.flow_solver)},
          {"encoder_solver", to_json(c.encoder_solver)},
          {"preprocess", to_json(c.preprocess)},
          {"seed", c.seed}};
}

void read_json(const Json& j, const std::string& path, ModelConfig& c, ConfigErrors& errors)
{
  Handler trace = [&c, &errors](const Json& v, const std::string& where) {
    const std::string s = v.is_string() ? v.get<std::string>() : "";
    if (s == "auto")
      c.train_trace.reset();
    else if (s == "exact")
      c.train_trace = TraceMode::exact;
    else if (s == "hutchinson")
      c.train_trace = TraceMode::hutchinson;
    else
      errors.push_back(where + ": expected \"auto\", \"exact\" or \"hutchinson\"");
  };
  read_object(j, path,
              {{"encoder", enumeration(c.encoder, &parse_encoder_kind, errors)},
               {"flow", enumeration(c.flow, &parse_flow_kind, errors)},
               {"formulation", enumeration(c.formulation, &parse_formulation, errors)},
               {"horizon", integer(c.horizon, errors)},
               {"hidden_dim", integer(c.hidden_dim, errors)},
               {"cde_width", integer(c.cde_width, errors)},
               {"coupling_layers", integer(c.coupling_layers, errors)},
               {"coupling_hidden", integer(c.coupling_hidden, errors)},
               {"cnf_hidden", integer(c.cnf_hidden, errors)},
               {"cnf_depth", integer(c.cnf_depth, errors)},
               {"train_trace", trace},
               {"hutchinson_probes", integer(c.hutchinson_probes, errors)},
               {"norm_momentum", real(c.norm_momentum, errors)},
               {"flow_solver", nested(c.flow_solver, errors)},
               {"encoder_solver", nested(c.encoder_solver, errors)},
               {"preprocess", nested(c.preprocess, errors)},
               {"seed", unsigned_integer(c.seed, errors)}},
              errors);
}

Json to_json(const TrainConfig& c)
{
  return {{"learning_rate", c.learning_rate},
          {"gamma", c.gamma},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"clip_norm", c.clip_norm}};
}

void read_json(const Json& j, const std::string& path, TrainConfig& c, ConfigErrors& errors)
{
  read_object(j, path,
              {{"learning_rate", real(c.learning_rate, errors)},
               {"gamma", real(c.gamma, errors)},
               {"epochs", integer(c.epochs, errors)},
               {"batch_size", integer(c.batch_size, errors)},
               {"seed", unsigned_integer(c.seed, errors)},
               {"beta1", real(c.beta1, errors)},
               {"beta2", real(c.beta2, errors)},
               {"adam_eps", real(c.adam_eps, errors)},
               {"clip_norm", real(c.clip_norm, errors)}},
              errors);
}

Json to_json(const SlicingConfig& c)
{
  return {{"obs_len", c.obs_len},
          {"pred_len", c.pred_len},
          {"step", c.step},
          {"max_trajectory_len", c.max_trajectory_len},
          {"require_full", c.require_full}};
}

void read_json(const Json& j, const std::string& path, SlicingConfig& c, ConfigErrors& errors)
{
  read_object(j, path,
              {{"obs_len", integer(c.obs_len, errors)},
               {"pred_len", integer(c.pred_len, errors)},
               {"step", integer(c.step, errors)},
               {"max_trajectory_len", integer(c.max_trajectory_len, errors)},
               {"require_full", boolean(c.require_full, errors)}},
              errors);
}

Json to_json(const MinMaxBounds& b)
{
  return {{"x_min", b.x_min}, {"x_max", b.x_max}, {"y_min", b.y_min}, {"y_max", b.y_max}};
}

void read_json(const Json& j, const std::string& path, MinMaxBounds& b, ConfigErrors& errors)
{
  read_object(j, path,
              {{"x_min", real(b.x_min, errors)},
               {"x_max", real(b.x_max, errors)},
               {"y_min", real(b.y_min, errors)},
               {"y_max", real(b.y_max, errors)}},
              errors);
}

void throw_config_errors(const ConfigErrors& errors)
{
  if (errors.empty())
    return;
  std::string msg = std::to_string(errors.size()) + " configuration error" + (errors.size() > 1 ? "s" : "") + ":";
  for (const std::string& e : errors)
    msg += "\n  " + e;
  throw ConfigError(msg);
}

ConfigErrors config_error_messages(const std::exception& e)
{
  const std::string msg = e.what();
  ConfigErrors out;
  std::size_t pos = msg.find("\n  ");
  if (pos == std::string::npos)
    return {msg};
  while (pos != std::string::npos) {
    const std::size_t next = msg.find("\n  ", pos + 3);
    out.push_back(msg.substr(pos + 3, next == std::string::npos ? std::string::npos : next - pos - 3));
    pos = next;
  }
  return out;
}

} // namespace trajflow
