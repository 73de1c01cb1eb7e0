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
#include <numbers>

#include <gtest/gtest.h>

#include "kmdev/bounds.hpp"
#include "oracles.hpp"

namespace kmdev {
namespace {

BoundQuery query(Tier tier, double eps, double delta, std::uint64_t k = 1, std::uint64_t d = 1) {
  BoundQuery q;
  q.tier = tier;
  q.epsilon = eps;
  q.delta = delta;
  q.k = k;
  q.d = d;
  q.profile.sigma2 = 1.0;
  return q;
}

TEST(Bounds, PseudoDimension) {
  EXPECT_NEAR(pdim_bound(1, 1), 30.0 * std::log(6.0), 1e-12);
  EXPECT_NEAR(pdim_bound(1, 1), 53.753, 1e-3);
  EXPECT_NEAR(pdim_bound(2, 3), 84.0 * std::log(12.0), 1e-12);
  EXPECT_NEAR(pdim_bound(2, 3), 208.73, 1e-2);
}

TEST(Bounds, KurtosisExample) {
  auto q = query(Tier::Kurtosis, 0.5, 0.5);
  q.profile.m4hat = 1.0;
  const auto r = sample_size_kurtosis(q);
  const auto exact = oracle::ceil_u64(oracle::kurtosis(0.5, 0.5, 1, 1, 1));
  EXPECT_EQ(exact, 251'096'434u);
  EXPECT_EQ(r.m_required, static_cast<double>(exact));
  EXPECT_DOUBLE_EQ(r.intermediates.at("t_threshold"), 1152.0);
  EXPECT_NEAR(r.intermediates.at("log_terms"), 272.457, 1e-3);

  auto q2 = query(Tier::Kurtosis, 0.1, 0.1);
  q2.profile.m4hat = 3.0;
  EXPECT_DOUBLE_EQ(sample_size_kurtosis(q2).intermediates.at("t_threshold"), 7040.0);
}

TEST(Bounds, MomentExample) {
  auto q = query(Tier::Moment, 0.5, 0.5);
  q.p = 8;
  q.profile.mphat[8] = 1.0;
  const auto r = sample_size_moment(q);
  EXPECT_DOUBLE_EQ(r.intermediates.at("mp_root"), 1.0);
  EXPECT_NEAR(r.intermediates.at("m1"), 40.0 * 272.457, 0.1);
  EXPECT_NEAR(r.intermediates.at("m1"), 10898.3, 0.05);
  EXPECT_DOUBLE_EQ(r.intermediates.at("delta_branch"), 16.0);
}

TEST(Bounds, MomentRejectsUnsupportedOrders) {
  auto q = query(Tier::Moment, 0.5, 0.5);
  q.profile.mphat[4] = 3.0;
  q.profile.mphat[10] = 3.0;
  for (int p : {4, 10, 6, 0}) {
    q.p = p;
    try {
      sample_size_moment(q);
      ADD_FAILURE() << "p=" << p << " accepted";
    } catch (const PreconditionError& e) {
      EXPECT_NE(std::string(e.what()).find("unsupported p"), std::string::npos);
    }
  }
  q.p = 12;
  EXPECT_THROW(sample_size_moment(q), PreconditionError);  // M_12 missing
}

TEST(Bounds, SubgaussianOrder) {
  EXPECT_EQ(subgaussian_order(0.99), 8);
  EXPECT_EQ(subgaussian_order(0.01), 20);
  EXPECT_EQ(subgaussian_order(0.01), oracle::subgaussian_p(oracle::big(1) / 100));
  for (double delta = 0.001; delta < 1; delta += 0.0137)
    EXPECT_EQ(subgaussian_order(delta), oracle::subgaussian_p(delta)) << delta;
}

TEST(Bounds, SubgaussianExample) {
  auto q = query(Tier::Subgaussian, 0.5, 0.99);
  q.profile.subgauss = std::pair{2.0, 1.0};
  const auto r = sample_size_subgaussian(q);
  EXPECT_EQ(r.intermediates.at("p_star"), 8.0);
  EXPECT_DOUBLE_EQ(4.0 + r.intermediates.at("mp_root"), 36.0);
  q.profile.subgauss = std::pair{1.0, 1.0};
  EXPECT_THROW(sample_size_subgaussian(q), PreconditionError);
  q.profile.subgauss = std::pair{2.0, 0.0};
  EXPECT_THROW(sample_size_subgaussian(q), PreconditionError);
}

TEST(Bounds, BoundedExample) {
  auto q = query(Tier::BoundedSupport, 0.5, 0.5);
  q.profile.diameter = 1.0;
  q.profile.sigma2 = 1.0 / 12.0;
  const auto r = sample_size_bounded(q);
  EXPECT_NEAR(r.intermediates.at("r4_over_sigma4"), 144.0, 1e-9);
  EXPECT_NEAR(r.intermediates.at("t_threshold"), 9344.0, 1e-7);
  const auto exact = oracle::ceil_u64(oracle::bounded(0.5, 0.5, 1, 1, 144));
  EXPECT_EQ(r.m_required, static_cast<double>(exact));
  EXPECT_NEAR(r.m_real, 12800.0 * 152 / 0.25 * 272.457, 1e-5 * r.m_real);
}

// The support argument's own threshold yields a smaller sample size than
// the stated bound, so the stated bound is implied.
TEST(Bounds, BoundedProofThresholdIsNoLarger) {
  for (double r4 : {1.0, 10.0, 144.0, 1e4})
    for (double eps : {0.05, 0.5, 0.9}) {
      auto q = query(Tier::BoundedSupport, eps, 0.1, 3, 2);
      q.profile.diameter = std::pow(r4, 0.25);
      const auto stated = sample_size_bounded(q);
      const auto proof = sample_size_framework(stated.intermediates.at("t_threshold"), pdim_bound(3, 2), eps, 0.1);
      EXPECT_LE(proof.m_required, stated.m_required);
    }
}

TEST(Bounds, FrameworkExample) {
  const auto r = sample_size_framework(1.0, 10.0, 0.1, 0.01);
  EXPECT_EQ(r.m_required, 1'152'104.0);
  EXPECT_EQ(oracle::ceil_u64(oracle::framework(1, 10, oracle::big(1) / 10, oracle::big(1) / 100)), 1'152'104u);
}

TEST(Bounds, RejectsOutOfRangeEpsilonDelta) {
  for (auto [e, d] : {std::pair{0.0, 0.5}, {1.0, 0.5}, {0.5, 0.0}, {0.5, 1.0}, {-1.0, 0.5}}) {
    EXPECT_THROW(sample_size_framework(1.0, 1.0, e, d), PreconditionError);
    auto q = query(Tier::Kurtosis, e, d);
    q.profile.m4hat = 3.0;
    EXPECT_THROW(sample_size_kurtosis(q), PreconditionError);
  }
  auto q = query(Tier::Kurtosis, 0.5, 0.5);
  EXPECT_THROW(sample_size_kurtosis(q), PreconditionError);  // no M4
}

// Every tier is the framework evaluated at that tier's threshold.
TEST(Bounds, TiersEqualFrameworkComposition) {
  for (const auto& pt : oracle::regression_grid()) {
    auto q = query(Tier::Kurtosis, pt.eps, pt.delta, pt.k, pt.d);
    const double pdim = pdim_bound(pt.k, pt.d);
    switch (pt.tier) {
      case 0: {
        q.profile.m4hat = pt.moment;
        EXPECT_EQ(sample_size_kurtosis(q).m_required,
                  sample_size_framework(kurtosis_threshold(pt.moment, pt.delta), pdim, pt.eps, pt.delta).m_required);
        break;
      }
      case 1: {
        q.p = pt.p;
        q.profile.mphat[pt.p] = pt.moment;
        const auto r = sample_size_moment(q);
        const auto f = sample_size_framework(moment_threshold(pt.p, std::pow(pt.moment, 4.0 / pt.p)), pdim, pt.eps, pt.delta);
        EXPECT_EQ(r.m_required, std::max(f.m_required, std::ceil(std::pow(8.0 / pt.delta, 8.0 / pt.p))));
        break;
      }
      case 2: {
        q.profile.subgauss = std::pair{pt.moment, pt.b};
        const int p = subgaussian_order(pt.delta);
        EXPECT_EQ(sample_size_subgaussian(q).m_required,
                  sample_size_framework(moment_threshold(p, pt.moment * pt.b * p * p / 4.0), pdim, pt.eps, pt.delta).m_required);
        break;
      }
      case 3: {
        q.profile.diameter = std::pow(pt.moment, 0.25);
        const auto r = sample_size_bounded(q);
        EXPECT_EQ(r.m_required,
                  sample_size_framework(r.intermediates.at("t_implied"), pdim, pt.eps, pt.delta).m_required);
        break;
      }
      default: break;
    }
  }
}

// Property: monotone in every argument in the expected direction.
TEST(Bounds, KurtosisTierIsMonotone) {
  auto m = [](double eps, double delta, std::uint64_t k, std::uint64_t d, double m4) {
    auto q = query(Tier::Kurtosis, eps, delta, k, d);
    q.profile.m4hat = m4;
    return sample_size_kurtosis(q).m_required;
  };
  const double base = m(0.3, 0.3, 3, 3, 3);
  EXPECT_GT(m(0.2, 0.3, 3, 3, 3), base);
  EXPECT_GT(m(0.3, 0.2, 3, 3, 3), base);
  EXPECT_GT(m(0.3, 0.3, 4, 3, 3), base);
  EXPECT_GT(m(0.3, 0.3, 3, 4, 3), base);
  EXPECT_GT(m(0.3, 0.3, 3, 3, 4), base);
}

TEST(Bounds, AuxiliaryConstants) {
  EXPECT_NEAR(sqrt_series(1), std::sqrt(0.5), 1e-15);
  // Direct long-double summation as the oracle.
  long double s = 0;
  for (int j = 1; j <= 200; ++j) s += std::sqrt(static_cast<long double>(j) / std::pow(2.0L, j));
  EXPECT_NEAR(sqrt_series(200), static_cast<double>(s), 1e-13);
  EXPECT_LT(sqrt_series(200), 2 + 2 * std::numbers::sqrt2);
  EXPECT_LT(2 + 2 * std::numbers::sqrt2, 5.0);

  for (double a : {std::numbers::e, 5.0, 100.0}) {
    const double x = largest_log_root(a);
    EXPECT_NEAR(x, a * std::log(x), 1e-9 * x);
    EXPECT_LE(x, 2 * a * std::log(2 * a));
  }
  const auto rep = verify_aux_constants(10000, 3);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_EQ(rep.log_root_pairs, 10000u);
  EXPECT_EQ(rep.log_root_violations, 0u);
}

}  // namespace
}  // namespace kmdev
