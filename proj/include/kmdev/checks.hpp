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

// Self-check suites run by `kmdev verify`: envelope identities and
// domination, the Moors identity, and the auxiliary constants.

#include <cmath>
#include <string>
#include <vector>

#include "kmdev/bounds.hpp"
#include "kmdev/distributions.hpp"
#include "kmdev/moments.hpp"
#include "kmdev/quantization.hpp"
#include "kmdev/rng.hpp"

namespace kmdev {

struct FuzzTally {
  std::size_t cases = 0;
  std::size_t triangle_violations = 0;   // d(x,Q)^2 <= 2 d(x,mu)^2 + 2 d(mu,Q)^2
  std::size_t center_violations = 0;     // d(mu,Q)^2 <= 2 sigma^2 + 2 E[d(x,Q)^2]
  std::size_t envelope_violations = 0;   // f_Q(x) <= s(x)
  double worst_envelope_ratio = 0.0;     // max f_Q(x) / s(x)
};

/// Random (x, Q, P) cases. Every fourth case uses a small empirical measure
/// with its own mean and variance, on which all three inequalities are exact
/// statements about that measure.
inline FuzzTally domination_fuzz(std::size_t cases, std::uint64_t seed, double slack = 1e-9) {
  FuzzTally t;
  CounterRng rng(seed);
  PolarNormal normal;
  auto over = [&](double lhs, double rhs) { return lhs > rhs * (1.0 + slack) + 1e-300; };
  for (std::size_t c = 0; c < cases; ++c) {
    const std::uint64_t case_seed = derive_seed(seed, c);
    DistributionSpec spec;
    const auto family = rng.below(5);
    std::size_t d = 1;
    switch (family) {
      case 0: spec = DistributionSpec::gaussian(1, std::exp(4.0 * rng.uniform() - 2.0), {4.0 * rng.uniform() - 2.0}); break;
      case 1: spec = DistributionSpec::bernoulli(0.02 + 0.96 * rng.uniform()); break;
      case 2: spec = DistributionSpec::student_t(4.5 + 6.0 * rng.uniform(), std::exp(2.0 * rng.uniform() - 1.0)); break;
      case 3: spec = DistributionSpec::uniform_ball(0.1 + 5.0 * rng.uniform(), 1); break;
      default: {
        d = 1 + rng.below(4);
        spec = DistributionSpec::empirical(sample(DistributionSpec::gaussian(d), 50 + rng.below(200), case_seed));
        break;
      }
    }
    const auto prof = spec.parametric() ? analytic_profile(spec) : [&] {
      const auto em = estimate_moments(*spec.data);
      MomentProfile p;
      p.mu = em.mu_hat;
      p.sigma2 = em.sigma2_hat;
      return p;
    }();
    const std::size_t k = 1 + rng.below(4);
    const double spread = 3.0 * std::sqrt(prof.sigma2) * std::exp(2.0 * rng.uniform() - 1.0);
    Matrix centers(k, d);
    for (double& v : centers.data()) v = spread * normal(rng);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < d; ++i) centers(j, i) += prof.mu[i];
    const CenterSet q(std::move(centers));
    const double expected = analytic_expected_error(spec, q);

    std::vector<double> x(d);
    const double xs = spread * std::exp(3.0 * rng.uniform());
    for (std::size_t i = 0; i < d; ++i) x[i] = prof.mu[i] + xs * normal(rng);

    const double dxq = dist2(x, q);
    const double dxmu = squared_distance(x, prof.mu);
    const double dmuq = dist2(prof.mu, q);
    const double f = normalized_loss(x, q, prof.sigma2, expected);
    const double s = envelope(x, prof.mu, prof.sigma2);
    ++t.cases;
    t.triangle_violations += over(dxq, 2.0 * dxmu + 2.0 * dmuq);
    t.center_violations += over(dmuq, 2.0 * prof.sigma2 + 2.0 * expected);
    t.envelope_violations += over(f, s);
    t.worst_envelope_ratio = std::max(t.worst_envelope_ratio, f / s);
  }
  return t;
}

inline std::vector<CheckResult> envelope_checks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };

  // Exact two-point expectation for Bernoulli(1/2): s takes the value
  // 4 (1/4) / (1/4) + 8 = 12 at both atoms.
  {
    const auto spec = DistributionSpec::bernoulli(0.5);
    const auto prof = analytic_profile(spec);
    const double zero = 0.0, one = 1.0;
    const double s0 = envelope({&zero, 1}, prof.mu, prof.sigma2), s1 = envelope({&one, 1}, prof.mu, prof.sigma2);
    const double exact = 0.5 * s0 * s0 + 0.5 * s1 * s1;
    const double formula = envelope_second_moment(prof);
    out.push_back({"envelope_second_moment_bernoulli", std::abs(exact - 144.0) <= 1e-12 && std::abs(formula - 144.0) <= 1e-12,
                   "two-point " + detail::fmt_double(exact) + ", formula " + detail::fmt_double(formula)});
  }
  {
    const auto spec = DistributionSpec::gaussian(1);
    const auto prof = analytic_profile(spec);
    const double mc = empirical_envelope_second_moment(sample(spec, 1'000'000, seed), prof.mu, prof.sigma2);
    out.push_back({"envelope_second_moment_gaussian", rel(mc, 176.0) <= 0.01 && envelope_second_moment(prof) == 176.0,
                   "monte carlo " + detail::fmt_double(mc) + " vs 176"});
  }
  {
    const auto spec = DistributionSpec::uniform_ball(1.0, 1);
    const auto prof = analytic_profile(spec);
    const double mc = empirical_envelope_second_moment(sample(spec, 1'000'000, seed + 1), prof.mu, prof.sigma2);
    out.push_back({"envelope_second_moment_uniform", rel(mc, 156.8) <= 0.01 && rel(envelope_second_moment(prof), 156.8) <= 1e-12,
                   "monte carlo " + detail::fmt_double(mc) + " vs 156.8"});
  }
  {
    const auto t = domination_fuzz(10000, seed + 2);
    out.push_back({"envelope_domination", t.envelope_violations == 0,
                   std::to_string(t.envelope_violations) + " violations in " + std::to_string(t.cases) +
                       " cases, worst f/s " + detail::fmt_double(t.worst_envelope_ratio)});
    out.push_back({"triangle_and_center_bounds", t.triangle_violations == 0 && t.center_violations == 0,
                   std::to_string(t.triangle_violations + t.center_violations) + " violations"});
  }
  return out;
}

inline std::vector<CheckResult> moors_checks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  const DistributionSpec specs[] = {DistributionSpec::gaussian(1), DistributionSpec::gaussian(3, 2.0),
                                    DistributionSpec::student_t(5), DistributionSpec::bernoulli(0.3),
                                    DistributionSpec::pareto(4.5)};
  double worst = 0.0;
  std::size_t n_checks = 0;
  for (std::size_t s = 0; s < std::size(specs); ++s)
    for (std::size_t n : {10, 1000, 100000}) {
      const auto x = sample(specs[s], n, derive_seed(seed, s * 10 + n));
      if (detail::sample_variance(x) == 0.0) continue;
      const auto [lhs, rhs] = moors_identity_check(x);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, lhs));
      ++n_checks;
    }
  out.push_back({"moors_identity", worst <= 1e-9,
                 std::to_string(n_checks) + " samples, worst relative gap " + detail::fmt_double(worst)});
  return out;
}

/// Every check run by `kmdev verify`.
inline std::vector<CheckResult> run_verify_suite(std::uint64_t seed) {
  auto checks = verify_aux_constants().checks;
  for (auto& c : envelope_checks(seed)) checks.push_back(std::move(c));
  for (auto& c : moors_checks(seed)) checks.push_back(std::move(c));
  return checks;
}

}  // namespace kmdev
