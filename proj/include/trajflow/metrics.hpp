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

// Forecast evaluation: best-of-n displacement errors, pooled RMSE and the
// empirical continuous ranked probability score.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "trajflow/diffcore.hpp"

namespace trajflow {

// n sampled trajectories (each S x 2) for one instance and its ground truth.
struct SampleSet
{
  std::vector<Matrix> samples;
  Matrix truth;
};

double min_ade(const SampleSet& set);
double min_fde(const SampleSet& set);

// sqrt of the mean squared distance over every (sample, timestep) pair.
double rmse(const SampleSet& set);
// Pools every point of every instance.
double rmse(const std::vector<SampleSet>& sets);

// CRPS of a univariate sample against the observation y, using the
// plotting-position estimate F(x_(i)) = (i - 0.5) / n of the sorted sample:
// E|X - y| + E[X] - 2 E[X F(X)].
double crps_empirical(std::vector<double> samples, double y);

// CRPS per coordinate and timestep, averaged within the instance.
double crps_instance(const SampleSet& set);
// Mean of crps_instance over instances.
double crps_report(const std::vector<SampleSet>& sets);

// Instance means of min_ade / min_fde.
double mean_min_ade(const std::vector<SampleSet>& sets);
double mean_min_fde(const std::vector<SampleSet>& sets);

struct MetricRow
{
  std::string metric;
  double value;
  std::size_t n_samples;
  std::size_t n_instances;
  std::uint64_t seed;
};

// CSV with header metric,value,n_samples,n_instances,seed.
void write_report(std::ostream& out, const std::vector<MetricRow>& rows);

} // namespace trajflow
