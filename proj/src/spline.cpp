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

#include "trajflow/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trajflow/errors.hpp"

namespace trajflow {

Matrix solve_tridiagonal(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
                         const Matrix& rhs)
{
  const std::size_t n = diag.size();
  if (n == 0 || lower.size() + 1 != n || upper.size() + 1 != n || static_cast<std::size_t>(rhs.rows()) != n)
    throw DimensionError("tridiagonal system has inconsistent sizes");
  std::vector<double> c(n, 0.0);
  Matrix x = rhs;
  double denom = diag[0];
  if (denom == 0.0)
    throw DegeneracyError("tridiagonal system is singular");
  if (n > 1)
    c[0] = upper[0] / denom;
  x.row(0) /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag[i] - lower[i - 1] * c[i - 1];
    if (denom == 0.0)
      throw DegeneracyError("tridiagonal system is singular");
    if (i + 1 < n)
      c[i] = upper[i] / denom;
    const Index r = static_cast<Index>(i);
    x.row(r) = (x.row(r) - lower[i - 1] * x.row(r - 1)) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    const Index r = static_cast<Index>(i);
    x.row(r) -= c[i] * x.row(r + 1);
  }
  return x;
}

SplinePath SplinePath::fit_natural_cubic(const Matrix& values, std::span<const double> times)
{
  const Index knots = values.rows();
  if (knots < 2)
    throw ContractError("a spline needs at least 2 knots, got " + std::to_string(knots));
  if (static_cast<Index>(times.size()) != knots)
    throw ContractError("spline knot times and values differ in length");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw ContractError("spline knot times must be strictly increasing");

  const std::size_t n = static_cast<std::size_t>(knots);
  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i)
    h[i] = times[i + 1] - times[i];

  // C2 continuity in t at interior knots, zero curvature at both ends.
  std::vector<double> lower(n - 1), diag(n), upper(n - 1);
  Matrix rhs(knots, values.cols());
  auto delta = [&](std::size_t i) { return values.row(static_cast<Index>(i + 1)) - values.row(static_cast<Index>(i)); };
  diag[0] = 2.0 / h[0];
  upper[0] = 1.0 / h[0];
  rhs.row(0) = 3.0 * delta(0) / (h[0] * h[0]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    lower[i - 1] = 1.0 / h[i - 1];
    diag[i] = 2.0 * (1.0 / h[i - 1] + 1.0 / h[i]);
    upper[i] = 1.0 / h[i];
    rhs.row(static_cast<Index>(i)) = 3.0 * (delta(i - 1) / (h[i - 1] * h[i - 1]) + delta(i) / (h[i] * h[i]));
  }
  lower[n - 2] = 1.0 / h[n - 2];
  diag[n - 1] = 2.0 / h[n - 2];
  rhs.row(knots - 1) = 3.0 * delta(n - 2) / (h[n - 2] * h[n - 2]);

  SplinePath path;
  path.times_.assign(times.begin(), times.end());
  path.derivs_ = solve_tridiagonal(lower, diag, upper, rhs);
  const Index pieces = knots - 1;
  path.alpha_.resize(pieces, values.cols());
  path.beta_.resize(pieces, values.cols());
  path.gamma_.resize(pieces, values.cols());
  path.delta_.resize(pieces, values.cols());
  for (Index i = 0; i < pieces; ++i) {
    const double hi = h[static_cast<std::size_t>(i)];
    const auto c0 = values.row(i);
    const auto c1 = values.row(i + 1);
    const auto d0 = hi * path.derivs_.row(i);
    const auto d1 = hi * path.derivs_.row(i + 1);
    path.alpha_.row(i) = c0;
    path.beta_.row(i) = d0;
    path.gamma_.row(i) = 3.0 * (c1 - c0) - 2.0 * d0 - d1;
    path.delta_.row(i) = 2.0 * (c0 - c1) + d0 + d1;
  }
  return path;
}

Index SplinePath::locate(double t, double& tau) const
{
  const double lo = times_.front(), hi = times_.back();
  const double slack = 1e-12 * std::max(1.0, hi - lo);
  if (!(t >= lo - slack && t <= hi + slack))
    throw RangeError("spline evaluated at t = " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  t = std::clamp(t, lo, hi);
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  Index i = static_cast<Index>(it - times_.begin()) - 1;
  i = std::clamp<Index>(i, 0, pieces() - 1);
  const std::size_t k = static_cast<std::size_t>(i);
  tau = (t - times_[k]) / (times_[k + 1] - times_[k]);
  return i;
}

Matrix SplinePath::eval(double t) const
{
  double tau = 0.0;
  const Index i = locate(t, tau);
  return alpha_.row(i) + tau * (beta_.row(i) + tau * (gamma_.row(i) + tau * delta_.row(i)));
}

Matrix SplinePath::eval_derivative(double t) const
{
  double tau = 0.0;
  const Index i = locate(t, tau);
  const double hi = times_[static_cast<std::size_t>(i) + 1] - times_[static_cast<std::size_t>(i)];
  return (beta_.row(i) + tau * (2.0 * gamma_.row(i) + 3.0 * tau * delta_.row(i))) / hi;
}

Matrix SplinePath::eval_second_derivative(double t) const
{
  double tau = 0.0;
  const Index i = locate(t, tau);
  const double hi = times_[static_cast<std::size_t>(i) + 1] - times_[static_cast<std::size_t>(i)];
  return (2.0 * gamma_.row(i) + 6.0 * tau * delta_.row(i)) / (hi * hi);
}

} // namespace trajflow
