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

// Natural cubic spline control paths.
//
// Piece i is stored in its local coordinate tau in [0, 1]:
//   C_i(tau) = alpha_i + beta_i tau + gamma_i tau^2 + delta_i tau^3
// with knot derivatives D_i taken with respect to tau. For unit knot spacing
// the knot derivatives solve the classic [2 1; 1 4 1; ...; 1 2] system.

#include <span>
#include <vector>

#include "trajflow/diffcore.hpp"

namespace trajflow {

// Solves a tridiagonal system with the Thomas algorithm. `lower` and `upper`
// have n-1 entries; rhs is n x channels and is solved column by column.
Matrix solve_tridiagonal(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
                         const Matrix& rhs);

class SplinePath
{
public:
  // values: (n+1) x channels, one row per knot.
  static SplinePath fit_natural_cubic(const Matrix& values, std::span<const double> times);

  Index channels() const { return alpha_.cols(); }
  Index pieces() const { return alpha_.rows(); }
  const std::vector<double>& knot_times() const { return times_; }

  // Knot derivatives dC/dt, (n+1) x channels.
  const Matrix& knot_derivatives() const { return derivs_; }
  const Matrix& alpha() const { return alpha_; }
  const Matrix& beta() const { return beta_; }
  const Matrix& gamma() const { return gamma_; }
  const Matrix& delta() const { return delta_; }

  // 1 x channels row.
  Matrix eval(double t) const;
  Matrix eval_derivative(double t) const;
  Matrix eval_second_derivative(double t) const;

private:
  // Returns the piece index and sets tau.
  Index locate(double t, double& tau) const;

  std::vector<double> times_;
  Matrix derivs_;
  Matrix alpha_, beta_, gamma_, delta_;
};

} // namespace trajflow
