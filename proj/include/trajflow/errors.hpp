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

#include <stdexcept>
#include <string>

namespace trajflow {

// Root of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class DegeneracyError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };

// Adaptive solver gave up before reaching the end of the interval.
class NonConvergenceError : public Error
{
public:
  NonConvergenceError(const std::string& what, double last_t)
    : Error(what), last_t_(last_t) {}
  double last_t() const { return last_t_; }
private:
  double last_t_;
};

// Training produced a non-finite loss.
class DivergenceError : public Error
{
public:
  DivergenceError(const std::string& what, std::size_t epoch, std::size_t batch)
    : Error(what), epoch_(epoch), batch_(batch) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }
private:
  std::size_t epoch_;
  std::size_t batch_;
};

// Input files.
class FormatError : public Error { using Error::Error; };

class ParseError : public Error
{
public:
  ParseError(const std::string& what, std::size_t row) : Error(what), row_(row) {}
  std::size_t row() const { return row_; }
private:
  std::size_t row_;
};

class IoError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class VersionError : public Error { using Error::Error; };

} // namespace trajflow
