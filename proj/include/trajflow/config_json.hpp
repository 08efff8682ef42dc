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

// JSON mapping of the configuration structs. Readers are strict: unknown
// keys and wrongly typed values are collected into `errors` (one message per
// offending key, prefixed with its dotted path) instead of stopping at the
// first problem. Absent keys keep their current values.

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "trajflow/data.hpp"
#include "trajflow/errors.hpp"
#include "trajflow/model.hpp"
#include "trajflow/odeint.hpp"

namespace trajflow {

using Json = nlohmann::json;
using ConfigErrors = std::vector<std::string>;

Json to_json(const SolverConfig& c);
Json to_json(const PreprocessConfig& c);
Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const SlicingConfig& c);
Json to_json(const MinMaxBounds& b);

void read_json(const Json& j, const std::string& path, SolverConfig& c, ConfigErrors& errors);
void read_json(const Json& j, const std::string& path, PreprocessConfig& c, ConfigErrors& errors);
void read_json(const Json& j, const std::string& path, ModelConfig& c, ConfigErrors& errors);
void read_json(const Json& j, const std::string& path, TrainConfig& c, ConfigErrors& errors);
void read_json(const Json& j, const std::string& path, SlicingConfig& c, ConfigErrors& errors);
void read_json(const Json& j, const std::string& path, MinMaxBounds& b, ConfigErrors& errors);

// Throws ConfigError listing every message, if there are any.
void throw_config_errors(const ConfigErrors& errors);
// The individual messages of an error thrown by throw_config_errors (or the
// whole message for any other error).
ConfigErrors config_error_messages(const std::exception& e);

namespace config_fields {

// Building blocks for strict object readers: each handler parses one key
// and appends a message to `errors` instead of throwing.

using Handler = std::function<void(const Json&, const std::string&)>;
using Handlers = std::map<std::string, Handler>;

inline void read_object(const Json& j, const std::string& path, const Handlers& handlers, ConfigErrors& errors)
{
  if (!j.is_object()) {
    errors.push_back(path + ": expected an object");
    return;
  }
  for (const auto& [key, value] : j.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    auto it = handlers.find(key);
    if (it == handlers.end())
      errors.push_back(where + ": unknown key");
    else
      it->second(value, where);
  }
}

inline Handler real(double& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) {
    if (!v.is_number())
      errors.push_back(where + ": expected a number");
    else
      out = v.get<double>();
  };
}

inline Handler integer(Index& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) {
    if (!v.is_number_integer())
      errors.push_back(where + ": expected an integer");
    else
      out = v.get<Index>();
  };
}

template <typename U>
inline Handler unsigned_integer(U& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      errors.push_back(where + ": expected a non-negative integer");
    else
      out = v.get<U>();
  };
}

inline Handler boolean(bool& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) {
    if (!v.is_boolean())
      errors.push_back(where + ": expected true or false");
    else
      out = v.get<bool>();
  };
}

template <typename E>
inline Handler enumeration(E& out, E (*parse)(const std::string&), ConfigErrors& errors)
{
  return [&out, parse, &errors](const Json& v, const std::string& where) {
    if (!v.is_string()) {
      errors.push_back(where + ": expected a string");
      return;
    }
    try {
      out = parse(v.get<std::string>());
    } catch (const ConfigError& e) {
      errors.push_back(where + ": " + e.what());
    }
  };
}

template <typename T>
inline Handler nested(T& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) { read_json(v, where, out, errors); };
}

inline Handler text(std::string& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) {
    if (!v.is_string())
      errors.push_back(where + ": expected a string");
    else
      out = v.get<std::string>();
  };
}

inline Handler real_list(std::vector<double>& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) {
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number(); }))
      errors.push_back(where + ": expected an array of numbers");
    else
      out = v.get<std::vector<double>>();
  };
}

inline Handler integer_list(std::vector<Index>& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) {
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number_integer(); }))
      errors.push_back(where + ": expected an array of integers");
    else
      out = v.get<std::vector<Index>>();
  };
}

inline Handler text_list(std::vector<std::string>& out, ConfigErrors& errors)
{
  return [&out, &errors](const Json& v, const std::string& where) {
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); }))
      errors.push_back(where + ": expected an array of strings");
    else
      out = v.get<std::vector<std::string>>();
  };
}

} // namespace config_fields

} // namespace trajflow
