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

#include <cmath>

#include <gtest/gtest.h>

#include "kmdev/deviation.hpp"

namespace kmdev {
namespace {

ExperimentConfig small_config(DistributionSpec spec, std::size_t k) {
  ExperimentConfig cfg;
  cfg.spec = std::move(spec);
  cfg.k = k;
  cfg.m_grid = {64, 128, 256, 512};
  cfg.replicates = 3;
  cfg.candidates_per_cell = 2;
  cfg.master_seed = 7;
  return cfg;
}

TEST(Deviation, BalancedBernoulliSampleHasZeroDeviationAtMean) {
  const auto spec = DistributionSpec::bernoulli(0.5);
  const auto q = CenterSet::scalars({0.5});
  EXPECT_DOUBLE_EQ(analytic_expected_error(spec, q), 0.25);
  EXPECT_DOUBLE_EQ(empirical_error(Matrix::column({0, 1, 0, 1, 1, 0}), q), 0.25);
}

TEST(Deviation, SampleMeanDeviationMatchesBiasVarianceIdentity) {
  const auto spec = DistributionSpec::gaussian(1);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = sample(spec, 500, s);
    const double mu_hat = column_mean(x)[0];
    const auto q = CenterSet::scalars({mu_hat});
    const double dev = std::abs(empirical_error(x, q) - analytic_expected_error(spec, q));
    const double sigma2_hat = estimate_moments(x).sigma2_hat;
    EXPECT_NEAR(dev, std::abs(sigma2_hat - (1 + mu_hat * mu_hat)), 1e-12);
  }
}

TEST(Deviation, RateFitRecoversExactPowerLaw) {
  const std::vector<std::size_t> m{128, 256, 512, 1024, 2048, 4096, 8192, 16384};
  std::vector<double> v;
  for (auto mm : m) v.push_back(3.7 / std::sqrt(static_cast<double>(mm)));
  const auto f = fit_rate(m, v);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.7), 1e-10);
  EXPECT_NEAR(f.stderr_slope, 0.0, 1e-10);
  const std::vector<std::size_t> short_grid{1, 2, 3};
  EXPECT_THROW(fit_rate(short_grid, std::vector<double>{1, 2, 3}), PreconditionError);
}

TEST(Deviation, CellSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::size_t m : {128u, 256u, 512u})
    for (std::size_t r = 0; r < 100; ++r) seen.insert(cell_seed(1, m, r));
  EXPECT_EQ(seen.size(), 300u);
}

TEST(Deviation, ConfigValidation) {
  auto cfg = small_config(DistributionSpec::gaussian(1), 3);
  cfg.m_grid = {2, 8};
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg.m_grid = {8, 8};
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg.m_grid = {};
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg.m_grid = {8, 16};
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(Deviation, CellRecordIsWellFormed) {
  const auto cfg = small_config(DistributionSpec::gaussian(1), 1);
  const auto rec = measure_cell(cfg, 128, 0);
  EXPECT_EQ(rec.m, 128u);
  EXPECT_EQ(rec.seed, cell_seed(7, 128, 0));
  EXPECT_EQ(rec.candidates, 2u + 5u * cfg.candidates_per_cell);
  EXPECT_GT(rec.delta_norm, 0.0);
  EXPECT_GE(rec.delta_abs, 0.0);
  EXPECT_EQ(measure_cell(cfg, 128, 0), rec);
}

// The population mean always satisfies E = sigma^2, so the restricted set
// is never empty and delta_abs >= |phi(mu) - sigma^2|.
TEST(Deviation, RestrictedSetContainsPopulationMean) {
  const auto cfg = small_config(DistributionSpec::gaussian(1), 1);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto rec = measure_cell(cfg, 64, r);
    std::uint64_t seed = cell_seed(7, 64, r);
    const auto x = sample(cfg.spec, 64, derive_seed(seed, 0));
    EXPECT_GE(rec.delta_abs, std::abs(empirical_error(x, CenterSet::scalars({0.0})) - 1.0));
  }
}

TEST(Deviation, DegenerateSamplesAreRetriedThenRejected) {
  auto cfg = small_config(DistributionSpec::bernoulli(1e-9), 1);
  cfg.m_grid = {2, 4, 8, 16};
  try {
    measure_cell(cfg, 2, 0);
    FAIL() << "expected rejection";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
  }
}

// Property: each candidate is keyed by its own index, so adding candidates
// can only raise the maximum.
TEST(Deviation, CandidateSetsAreNested) {
  for (const auto& spec : {DistributionSpec::gaussian(1), DistributionSpec::student_t(5)})
    for (std::size_t k : {1u, 3u}) {
      auto cfg = small_config(spec, k);
      double last_norm = 0.0, last_abs = 0.0;
      for (std::size_t c : {0u, 1u, 2u, 4u}) {
        cfg.candidates_per_cell = c;
        const auto rec = measure_cell(cfg, 128, 1);
        EXPECT_GE(rec.delta_norm, last_norm);
        EXPECT_GE(rec.delta_abs, last_abs);
        last_norm = rec.delta_norm;
        last_abs = rec.delta_abs;
      }
    }
}

TEST(Deviation, SweepIsIndependentOfThreadCount) {
  for (std::size_t k : {1u, 2u}) {
    auto cfg = small_config(DistributionSpec::gaussian(2), k);
    cfg.reference_size = 20000;
    const auto one = run_sweep(cfg);
    cfg.threads = 4;
    const auto four = run_sweep(cfg);
    EXPECT_EQ(one.records, four.records);
    EXPECT_EQ(one.mean_delta_norm, four.mean_delta_norm);
  }
}

TEST(Deviation, SweepAggregatesPerGridPoint) {
  const auto cfg = small_config(DistributionSpec::student_t(5), 2);
  const auto res = rate_sweep(cfg);
  ASSERT_EQ(res.records.size(), cfg.m_grid.size() * cfg.replicates);
  EXPECT_EQ(res.oracle_mode, ErrorMode::Analytic);
  for (std::size_t g = 0; g < cfg.m_grid.size(); ++g) {
    double s = 0.0;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      const auto& rec = res.records[g * cfg.replicates + r];
      EXPECT_EQ(rec.m, cfg.m_grid[g]);
      EXPECT_EQ(rec.replicate, r);
      s += rec.delta_norm;
    }
    EXPECT_NEAR(res.mean_delta_norm[g], s / cfg.replicates, 1e-15);
  }
  auto short_cfg = cfg;
  short_cfg.m_grid = {64, 128};
  EXPECT_THROW(rate_sweep(short_cfg), PreconditionError);
  EXPECT_NO_THROW(run_sweep(short_cfg));
}

// Property: delta_norm and the argmax are invariant under joint scaling.
TEST(Deviation, NormalizedDeviationIsScaleInvariant) {
  for (const auto& spec : {DistributionSpec::gaussian(1), DistributionSpec::student_t(5),
                           DistributionSpec::uniform_ball(2.0, 2)})
    for (double lambda : {1e-3, 1e3}) {
      auto cfg = small_config(spec, 2);
      cfg.reference_size = 20000;
      auto scaled_cfg = cfg;
      scaled_cfg.spec = scaled(spec, lambda);
      for (std::size_t r = 0; r < 3; ++r) {
        const auto a = measure_cell(cfg, 128, r);
        const auto b = measure_cell(scaled_cfg, 128, r);
        EXPECT_NEAR(b.delta_norm, a.delta_norm, 1e-9 * a.delta_norm) << to_string(spec) << " lambda=" << lambda;
        EXPECT_EQ(b.argmax_index, a.argmax_index);
        EXPECT_NEAR(b.delta_abs, lambda * lambda * a.delta_abs, 1e-9 * lambda * lambda * a.delta_abs);
      }
    }
}

TEST(Deviation, ScalingCounterexample) {
  const auto cfg = small_config(DistributionSpec::gaussian(1), 1);
  const auto rep = counterexample_scaling(1000.0, cfg, 0.1);
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.ratio, 1e6, 1e-6 * 1e6);
  EXPECT_NEAR(rep.lambda_threshold, 1.0 / std::sqrt(rep.base_deviation * 0.1), 1e-9);
  EXPECT_TRUE(rep.exceeds_epsilon);
  EXPECT_THROW(counterexample_scaling(0.0, cfg), PreconditionError);
}

TEST(Deviation, DivergenceCounterexample) {
  const auto x = sample(DistributionSpec::gaussian(1), 1000, 5);
  const std::vector<double> grid{10, 100, 1000, 10000};
  const auto rep = counterexample_divergence(x, grid, 1.0);
  EXPECT_TRUE(rep.pass) << rep.message;
  EXPECT_LE(rep.max_rel_error, 1e-9);
  EXPECT_NEAR(rep.measured_slope, 2 * std::abs(column_mean(x)[0]), 0.01 * rep.expected_slope);

  // q = mu_hat: both sides reduce to |phi(mu_hat) - sigma^2 - mu_hat^2|.
  const double mu = column_mean(x)[0];
  const std::vector<double> at_mu{mu, mu + 1};
  const auto r2 = counterexample_divergence(x, at_mu, 1.0);
  const double phi = empirical_error(x, CenterSet::scalars({mu}));
  EXPECT_NEAR(r2.points[0].direct, std::abs(phi - 1.0 - mu * mu), 1e-12);
  EXPECT_NEAR(r2.points[0].identity, r2.points[0].direct, 1e-12);

  const auto symmetric = counterexample_divergence(Matrix::column({-1, 1}), grid, 1.0);
  EXPECT_TRUE(symmetric.degenerate);
  EXPECT_NE(symmetric.message.find("degenerate"), std::string::npos);

  // A grid straddling the kink q0 = (phi(mu_hat) - sigma^2 + mu_hat^2) / (2 mu_hat) is rejected.
  const double q0 = (phi - 1.0 + mu * mu) / (2 * mu);
  const std::vector<double> straddle{q0 - 1, q0 + 1};
  const auto r3 = counterexample_divergence(x, straddle, 1.0);
  EXPECT_FALSE(r3.pass);
  EXPECT_NE(r3.message.find("linear regime"), std::string::npos);
}

TEST(Deviation, BernoulliCounterexample) {
  const auto rep = counterexample_bernoulli(10, 0.1, 20000, 3);
  const double floor_p = std::pow(0.1, 0.1);
  EXPECT_NEAR(floor_p, 0.7943, 1e-4);
  EXPECT_NEAR(rep.p, 0.8972, 1e-4);
  EXPECT_NEAR(rep.prob_all_ones, 0.3379, 1e-4);
  EXPECT_TRUE(rep.certified);
  EXPECT_EQ(rep.phi_all_ones, 0.0);
  EXPECT_NEAR(rep.expected_error, 1 - rep.p, 1e-15);
  EXPECT_TRUE(rep.guarantee_fails);
  EXPECT_TRUE(rep.pass);
  // Binomial SE of the rate at 20000 trials is about 0.0033.
  EXPECT_NEAR(rep.empirical_all_ones_rate, rep.prob_all_ones, 0.015);
}

TEST(Deviation, PairedComparisonCountsWins) {
  auto cfg = small_config(DistributionSpec::gaussian(1), 1);
  const auto a = run_sweep(cfg);
  const auto same = compare_sweeps(a, a, cfg);
  for (double f : same.fraction_greater) EXPECT_EQ(f, 0.0);
  auto t_cfg = cfg;
  t_cfg.spec = DistributionSpec::student_t(5);
  const auto b = run_sweep(t_cfg);
  const auto cmp = compare_sweeps(b, a, cfg);
  EXPECT_EQ(cmp.m_grid, cfg.m_grid);
  EXPECT_EQ(cmp.mean_a, b.mean_delta_norm);
}

}  // namespace
}  // namespace kmdev
