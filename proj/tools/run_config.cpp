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

#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "trajflow/errors.hpp"

namespace trajflow::app {

using namespace config_fields;

DataFormat parse_data_format(const std::string& s)
{
  if (s == "csv")
    return DataFormat::csv;
  if (s == "eth_ucy")
    return DataFormat::eth_ucy;
  if (s == "ind")
    return DataFormat::ind;
  if (s == "synthetic")
    return DataFormat::synthetic;
  throw ConfigError("unknown data format '" + s + "' (expected csv, eth_ucy, ind or synthetic)");
}

std::string to_string(DataFormat f)
{
  switch (f) {
  case DataFormat::csv:
    return "csv";
  case DataFormat::eth_ucy:
    return "eth_ucy";
  case DataFormat::ind:
    return "ind";
  case DataFormat::synthetic:
    break;
  }
  return "synthetic";
}

SyntheticProcess parse_synthetic_process(const std::string& s)
{
  if (s == "constant_velocity")
    return SyntheticProcess::constant_velocity;
  if (s == "two_mode_turn")
    return SyntheticProcess::two_mode_turn;
  throw ConfigError("unknown synthetic process '" + s + "' (expected constant_velocity or two_mode_turn)");
}

std::string to_string(SyntheticProcess p)
{
  return p == SyntheticProcess::constant_velocity ? "constant_velocity" : "two_mode_turn";
}

namespace {

Json to_json(const CsvColumns& c)
{
  return {{"scene_id", c.scene_id}, {"agent_id", c.agent_id}, {"frame", c.frame}, {"x", c.x}, {"y", c.y}};
}

void read(const Json& j, const std::string& path, CsvColumns& c, ConfigErrors& e)
{
  read_object(j, path,
              {{"scene_id", text(c.scene_id, e)},
               {"agent_id", text(c.agent_id, e)},
               {"frame", text(c.frame, e)},
               {"x", text(c.x, e)},
               {"y", text(c.y, e)}},
              e);
}

Json to_json(const SyntheticSpec& s)
{
  return {{"process", to_string(s.process)}, {"count", s.count},         {"length", s.length},
          {"observed", s.observed},          {"frame_period", s.frame_period}, {"noise", s.noise},
          {"speed_min", s.speed_min},        {"speed_max", s.speed_max}, {"extent", s.extent},
          {"turn_rate", s.turn_rate}};
}

void read(const Json& j, const std::string& path, SyntheticSpec& s, ConfigErrors& e)
{
  read_object(j, path,
              {{"process", enumeration(s.process, &parse_synthetic_process, e)},
               {"count", integer(s.count, e)},
               {"length", integer(s.length, e)},
               {"observed", integer(s.observed, e)},
               {"frame_period", real(s.frame_period, e)},
               {"noise", real(s.noise, e)},
               {"speed_min", real(s.speed_min, e)},
               {"speed_max", real(s.speed_max, e)},
               {"extent", real(s.extent, e)},
               {"turn_rate", real(s.turn_rate, e)}},
              e);
}

Json to_json(const DataConfig& d)
{
  return {{"format", to_string(d.format)},
          {"path", d.path},
          {"frame_period", d.frame_period},
          {"columns", to_json(d.columns)},
          {"synthetic", to_json(d.synthetic)},
          {"synthetic_seed", d.synthetic_seed},
          {"train_fraction", d.train_fraction},
          {"split_seed", d.split_seed}};
}

void read(const Json& j, const std::string& path, DataConfig& d, ConfigErrors& e)
{
  read_object(j, path,
              {{"format", enumeration(d.format, &parse_data_format, e)},
               {"path", text(d.path, e)},
               {"frame_period", real(d.frame_period, e)},
               {"columns", [&](const Json& v, const std::string& w) { read(v, w, d.columns, e); }},
               {"synthetic", [&](const Json& v, const std::string& w) { read(v, w, d.synthetic, e); }},
               {"synthetic_seed", unsigned_integer(d.synthetic_seed, e)},
               {"train_fraction", real(d.train_fraction, e)},
               {"split_seed", unsigned_integer(d.split_seed, e)}},
              e);
}

Json to_json(const GridSpec& g)
{
  return {{"x_min", g.x_min},
          {"x_max", g.x_max},
          {"y_min", g.y_min},
          {"y_max", g.y_max},
          {"resolution_x", g.resolution_x},
          {"resolution_y", g.resolution_y}};
}

void read(const Json& j, const std::string& path, GridSpec& g, ConfigErrors& e)
{
  read_object(j, path,
              {{"x_min", real(g.x_min, e)},
               {"x_max", real(g.x_max, e)},
               {"y_min", real(g.y_min, e)},
               {"y_max", real(g.y_max, e)},
               {"resolution_x", integer(g.resolution_x, e)},
               {"resolution_y", integer(g.resolution_y, e)}},
              e);
}

} // namespace

void RunConfig::validate() const
{
  ConfigErrors e;
  collect_errors(e);
  throw_config_errors(e);
}

void RunConfig::collect_errors(ConfigErrors& e) const
{
  auto collect = [&e](const char* section, auto&& check) {
    try {
      check();
    } catch (const Error& err) {
      for (const std::string& m : config_error_messages(err))
        e.push_back(std::string(section) + ": " + m);
    }
  };
  collect("model", [&] { model.validate(); });
  collect("train", [&] { train.validate(); });
  collect("slicing", [&] { slicing.validate(); });
  collect("grid.spec", [&] { grid.spec.validate(); });
  if (data.format != DataFormat::synthetic && data.path.empty())
    e.push_back("data.path: required for format " + to_string(data.format));
  if (!(data.frame_period > 0.0))
    e.push_back("data.frame_period: must be positive");
  if (!(data.train_fraction > 0.0 && data.train_fraction <= 1.0))
    e.push_back("data.train_fraction: must lie in (0, 1]");
  if (data.format == DataFormat::synthetic) {
    const SyntheticSpec& s = data.synthetic;
    if (s.count < 1 || s.observed < 1 || s.length <= s.observed)
      e.push_back("data.synthetic: need count >= 1 and length > observed >= 1");
    if (!(s.noise >= 0.0) || !(s.frame_period > 0.0) || !(s.speed_max >= s.speed_min))
      e.push_back("data.synthetic: need noise >= 0, frame_period > 0 and speed_max >= speed_min");
  }
  if (slicing.pred_len != model.horizon)
    e.push_back("slicing.pred_len: must equal model.horizon (" + std::to_string(model.horizon) + ")");
  if (eval.min_samples < 1 || eval.crps_samples < 1)
    e.push_back("eval: sample counts must be at least 1");
  if (eval.max_windows < 0)
    e.push_back("eval.max_windows: must be non-negative");
  if (sample.samples < 1 || sample.top_k < 1)
    e.push_back("sample: samples and top_k must be at least 1");
  for (Index w : sample.windows)
    if (w < 0)
      e.push_back("sample.windows: indices must be non-negative");
  if (grid.window < 0)
    e.push_back("grid.window: must be non-negative");
  if (grid.oversample < 1)
    e.push_back("grid.oversample: must be at least 1");
  for (double s : grid.times)
    if (!(s > 0.0 && s <= static_cast<double>(model.horizon)))
      e.push_back("grid.times: every time must lie in (0, " + std::to_string(model.horizon) + "]");
  for (const std::string& f : grid.formats)
    collect("grid.formats", [&] { parse_grid_format(f); });
  if (output.empty())
    e.push_back("output: must not be empty");
}

Json to_json(const RunConfig& c)
{
  return {{"data", to_json(c.data)},
          {"slicing", trajflow::to_json(c.slicing)},
          {"model", trajflow::to_json(c.model)},
          {"train", trajflow::to_json(c.train)},
          {"eval", {{"min_samples", c.eval.min_samples},
                    {"crps_samples", c.eval.crps_samples},
                    {"max_windows", c.eval.max_windows}}},
          {"sample", {{"samples", c.sample.samples}, {"top_k", c.sample.top_k}, {"windows", c.sample.windows}}},
          {"grid", {{"spec", to_json(c.grid.spec)},
                    {"relative", c.grid.relative},
                    {"window", c.grid.window},
                    {"times", c.grid.times},
                    {"fused", c.grid.fused},
                    {"oversample", c.grid.oversample},
                    {"formats", c.grid.formats}}},
          {"seed", c.seed},
          {"output", c.output}};
}

RunConfig run_config_from_json(const Json& j)
{
  RunConfig c;
  ConfigErrors e;
  // Seeds of the nested sections follow the top-level seed; reject attempts to
  // set them separately so there is a single source of randomness.
  Json doc = j;
  std::optional<std::uint64_t> model_seed, train_seed;
  if (doc.is_object()) {
    for (auto [section, slot] : {std::pair{"model", &model_seed}, {"train", &train_seed}}) {
      if (doc.contains(section) && doc[section].is_object() && doc[section].contains("seed")) {
        const Json& v = doc[section]["seed"];
        if (v.is_number_unsigned())
          *slot = v.get<std::uint64_t>();
        else
          e.push_back(std::string(section) + ".seed: expected a non-negative integer");
        doc[section].erase("seed");
      }
    }
  }
  read_object(doc, "",
              {{"data", [&](const Json& v, const std::string& w) { read(v, w, c.data, e); }},
               {"slicing", nested(c.slicing, e)},
               {"model", nested(c.model, e)},
               {"train", nested(c.train, e)},
               {"eval", [&](const Json& v, const std::string& w) {
                  read_object(v, w,
                              {{"min_samples", integer(c.eval.min_samples, e)},
                               {"crps_samples", integer(c.eval.crps_samples, e)},
                               {"max_windows", integer(c.eval.max_windows, e)}},
                              e);
                }},
               {"sample", [&](const Json& v, const std::string& w) {
                  read_object(v, w,
                              {{"samples", integer(c.sample.samples, e)},
                               {"top_k", integer(c.sample.top_k, e)},
                               {"windows", integer_list(c.sample.windows, e)}},
                              e);
                }},
               {"grid", [&](const Json& v, const std::string& w) {
                  read_object(v, w,
                              {{"spec", [&](const Json& sv, const std::string& sw) { read(sv, sw, c.grid.spec, e); }},
                               {"relative", boolean(c.grid.relative, e)},
                               {"window", integer(c.grid.window, e)},
                               {"times", real_list(c.grid.times, e)},
                               {"fused", boolean(c.grid.fused, e)},
                               {"oversample", integer(c.grid.oversample, e)},
                               {"formats", text_list(c.grid.formats, e)}},
                              e);
                }},
               {"seed", unsigned_integer(c.seed, e)},
               {"output", text(c.output, e)}},
              e);
  for (auto [section, slot] : {std::pair{"model", &model_seed}, {"train", &train_seed}})
    if (*slot && **slot != c.seed)
      e.push_back(std::string(section) + ".seed: follows the top-level seed; set \"seed\" instead");
  c.model.seed = c.seed;
  c.train.seed = c.seed;
  c.collect_errors(e);
  throw_config_errors(e);
  return c;
}

void apply_override(Json& j, const std::string& assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::exception&) {
    value = raw;
  }
  Json* node = &j;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) {
    if (part.empty())
      throw ConfigError("override '" + assignment + "' has an empty key segment");
    path.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object())
      throw ConfigError("override '" + assignment + "': '" + path[i] + "' is inside a non-object value");
    node = &(*node)[path[i]];
    if (node->is_null())
      *node = Json::object();
  }
  if (!node->is_object())
    throw ConfigError("override '" + assignment + "': parent of '" + path.back() + "' is not an object");
  (*node)[path.back()] = value;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                          std::optional<std::uint64_t> seed, std::optional<std::string> output)
{
  Json j = Json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot open config '" + path + "'");
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
  }
  for (const std::string& o : overrides)
    apply_override(j, o);
  if (seed)
    apply_override(j, "seed=" + std::to_string(*seed));
  if (output)
    j["output"] = *output;
  return run_config_from_json(j);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
  // splitmix64 finaliser over the combined words
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

} // namespace trajflow::app
