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

#include "trajflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "trajflow/errors.hpp"

namespace trajflow {

namespace {

void check_set(const SampleSet& set)
{
  if (set.samples.empty())
    throw ContractError("sample set is empty");
  if (set.truth.cols() != 2 || set.truth.rows() < 1)
    throw DimensionError("ground truth must be S x 2, got " + shape_string(set.truth));
  for (const Matrix& s : set.samples)
    if (s.rows() != set.truth.rows() || s.cols() != 2)
      throw ContractError("sample " + shape_string(s) + " does not match ground truth " + shape_string(set.truth));
}

double mean_over(const std::vector<SampleSet>& sets, double (*fn)(const SampleSet&))
{
  if (sets.empty())
    throw ContractError("no instances to evaluate");
  double total = 0.0;
  for (const SampleSet& s : sets)
    total += fn(s);
  return total / static_cast<double>(sets.size());
}

} // namespace

double min_ade(const SampleSet& set)
{
  check_set(set);
  double best = std::numeric_limits<double>::infinity();
  for (const Matrix& s : set.samples) {
    double total = 0.0;
    for (Index t = 0; t < s.rows(); ++t)
      total += std::hypot(s(t, 0) - set.truth(t, 0), s(t, 1) - set.truth(t, 1));
    best = std::min(best, total / static_cast<double>(s.rows()));
  }
  return best;
}

double min_fde(const SampleSet& set)
{
  check_set(set);
  const Index last = set.truth.rows() - 1;
  double best = std::numeric_limits<double>::infinity();
  for (const Matrix& s : set.samples)
    best = std::min(best, std::hypot(s(last, 0) - set.truth(last, 0), s(last, 1) - set.truth(last, 1)));
  return best;
}

double rmse(const SampleSet& set)
{
  return rmse(std::vector<SampleSet>{set});
}

double rmse(const std::vector<SampleSet>& sets)
{
  if (sets.empty())
    throw ContractError("no instances to evaluate");
  double total = 0.0;
  std::size_t count = 0;
  for (const SampleSet& set : sets) {
    check_set(set);
    for (const Matrix& s : set.samples)
      for (Index t = 0; t < s.rows(); ++t) {
        const double dx = s(t, 0) - set.truth(t, 0), dy = s(t, 1) - set.truth(t, 1);
        total += dx * dx + dy * dy;
        ++count;
      }
  }
  return std::sqrt(total / static_cast<double>(count));
}

double crps_empirical(std::vector<double> samples, double y)
{
  if (samples.empty())
    throw ContractError("CRPS needs at least one sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double abs_err = 0.0, mean = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    abs_err += std::abs(x - y);
    mean += x;
    weighted += x * ((static_cast<double>(i) + 0.5) / n);
  }
  return (abs_err + mean - 2.0 * weighted) / n;
}

double crps_instance(const SampleSet& set)
{
  check_set(set);
  double total = 0.0;
  std::vector<double> column(set.samples.size());
  for (Index t = 0; t < set.truth.rows(); ++t)
    for (Index c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < set.samples.size(); ++i)
        column[i] = set.samples[i](t, c);
      total += crps_empirical(column, set.truth(t, c));
    }
  return total / static_cast<double>(2 * set.truth.rows());
}

double crps_report(const std::vector<SampleSet>& sets)
{
  return mean_over(sets, &crps_instance);
}

double mean_min_ade(const std::vector<SampleSet>& sets)
{
  return mean_over(sets, &min_ade);
}

double mean_min_fde(const std::vector<SampleSet>& sets)
{
  return mean_over(sets, &min_fde);
}

void write_report(std::ostream& out, const std::vector<MetricRow>& rows)
{
  out << "metric,value,n_samples,n_instances,seed\n";
  char buf[64];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.metric << ',' << buf << ',' << r.n_samples << ',' << r.n_instances << ',' << r.seed << '\n';
  }
}

} // namespace trajflow
