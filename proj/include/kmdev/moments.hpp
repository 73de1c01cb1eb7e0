// Copyright 2026 The kmdev Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Plug-in moment estimates of d(x, mu) and the envelope s(x) that dominates
// every normalized k-means loss.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "kmdev/common.hpp"
#include "kmdev/distributions.hpp"

namespace kmdev {

struct EmpiricalMoments {
  std::size_t n = 0;
  std::vector<double> mu_hat;
  double sigma2_hat = 0.0;
  double m4hat_hat = 0.0;
  std::map<int, double> mphat_hat;
};

namespace detail {

inline std::vector<double> squared_distances(const Matrix& x, std::span<const double> center) {
  std::vector<double> d2(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) d2[i] = squared_distance(x.row(i), center);
  return d2;
}

inline double mean_of(const std::vector<double>& v, auto&& f) {
  return pairwise_sum(0, v.size(), [&](std::size_t i) { return f(v[i]); }) / static_cast<double>(v.size());
}

}  // namespace detail

/// Centred at the sample mean unless `mu` is given. Divides by n.
inline EmpiricalMoments estimate_moments(const Matrix& x, std::span<const int> ps = {},
                                         std::optional<std::vector<double>> mu = std::nullopt) {
  require(x.rows() >= 2, "moment estimation needs n >= 2");
  EmpiricalMoments em;
  em.n = x.rows();
  em.mu_hat = mu ? *mu : column_mean(x);
  require(em.mu_hat.size() == x.cols(), "mean override has wrong dimension");
  const auto d2 = detail::squared_distances(x, em.mu_hat);
  em.sigma2_hat = detail::mean_of(d2, [](double v) { return v; });
  if (!(em.sigma2_hat > 0.0)) throw PreconditionError("degenerate: zero variance");
  const double s4 = em.sigma2_hat * em.sigma2_hat;
  em.m4hat_hat = detail::mean_of(d2, [](double v) { return v * v; }) / s4;
  for (int p : ps) {
    require(p >= 1, "moment order must be >= 1");
    if (p == 4) {
      em.mphat_hat[4] = em.m4hat_hat;
      continue;
    }
    const double h = 0.5 * p;
    // Normalise before powering so large p does not overflow.
    em.mphat_hat[p] = detail::mean_of(d2, [&](double v) { return std::pow(v / em.sigma2_hat, h); });
  }
  return em;
}

inline EmpiricalMoments estimate_moments(const Matrix& x, std::initializer_list<int> ps) {
  return estimate_moments(x, std::span<const int>(ps.begin(), ps.size()));
}

/// s(x) = 4 d(x,mu)^2 / sigma^2 + 8.
inline double envelope(std::span<const double> x, std::span<const double> mu, double sigma2) {
  require(sigma2 > 0.0, "envelope requires sigma^2 > 0");
  return 4.0 * squared_distance(x, mu) / sigma2 + 8.0;
}

/// E_P[s(x)^2] = 128 + 16 M4.
inline double envelope_second_moment(const MomentProfile& profile) {
  if (!profile.m4hat) throw PreconditionError("assumption unavailable: kurtosis M4 required");
  return 128.0 + 16.0 * *profile.m4hat;
}

/// Sample mean of s(x)^2 under the given centre and variance.
inline double empirical_envelope_second_moment(const Matrix& x, std::span<const double> mu, double sigma2) {
  require(x.rows() >= 1, "empty sample");
  return pairwise_sum(0, x.rows(),
                      [&](std::size_t i) {
                        const double s = envelope(x.row(i), mu, sigma2);
                        return s * s;
                      }) /
         static_cast<double>(x.rows());
}

/// (M4 estimate, Var(d^2)/sigma^4 + 1) on the empirical measure. The two
/// sides are computed along different paths: lhs from the raw fourth
/// moment, rhs from a centred second pass over d^2.
inline std::pair<double, double> moors_identity_check(const Matrix& x) {
  const auto em = estimate_moments(x);
  const auto d2 = detail::squared_distances(x, em.mu_hat);
  const double var_d2 = detail::mean_of(d2, [&](double v) {
    const double c = v - em.sigma2_hat;
    return c * c;
  });
  return {em.m4hat_hat, var_d2 / (em.sigma2_hat * em.sigma2_hat) + 1.0};
}

}  // namespace kmdev
