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

// Independent reference computations for the tests. Nothing here calls the
// library code it is compared against.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using big = boost::multiprecision::cpp_bin_float_50;

/// Sample-size bounds evaluated in 50-digit arithmetic, written in the
/// closed product form rather than through a threshold t.
inline big log_terms(std::uint64_t k, std::uint64_t d, big delta) {
  const big kk = k, dd = d;
  return 3 + 30 * kk * (dd + 4) * log(6 * kk) + log(1 / delta);
}

inline std::uint64_t ceil_u64(const big& v) { return static_cast<std::uint64_t>(ceil(v)); }

inline big framework(big t, big pdim, big eps, big delta) {
  return 200 * t / (eps * eps) * (3 + 5 * pdim + log(1 / delta));
}

inline big kurtosis(big eps, big delta, std::uint64_t k, std::uint64_t d, big m4) {
  return 12800 * (8 + m4) / (eps * eps * delta) * log_terms(k, d, delta);
}

inline big moment(big eps, big delta, std::uint64_t k, std::uint64_t d, int p, big mp) {
  const big root = pow(mp, big(4) / p);
  const big first = 3200 * (p * (4 + root) * log_terms(k, d, delta)) / (eps * eps);
  const big second = pow(8 / delta, big(8) / p);
  return first > second ? first : second;
}

inline int subgaussian_p(big delta) {
  return 4 * static_cast<int>(ceil(big(5) / 4 + big(3) / 4 * log(1 / delta)));
}

inline big subgaussian(big eps, big delta, std::uint64_t k, std::uint64_t d, big a, big b) {
  const int p = subgaussian_p(delta);
  return 3200 * (p * (4 + a * b * p * p / 4) * log_terms(k, d, delta)) / (eps * eps);
}

inline big bounded(big eps, big delta, std::uint64_t k, std::uint64_t d, big r4_over_s4) {
  return 12800 * (8 + r4_over_s4) / (eps * eps) * log_terms(k, d, delta);
}

/// One point of the fixed 100-point regression grid. Tiers cycle
/// kurtosis, moment, subgaussian, bounded, framework.
struct GridPoint {
  int tier;
  double eps, delta;
  std::uint64_t k, d;
  double moment;  // M4, M_p, a, R^4/sigma^4, or t
  double b;       // subgaussian b
  int p;          // moment order
  double pdim;    // framework
};

/// Deterministic grid from a tiny LCG so the oracle does not share the
/// library's generator.
inline std::vector<GridPoint> regression_grid() {
  std::uint64_t s = 0x2545F4914F6CDD1DULL;
  auto u = [&] {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(s >> 11) * 0x1.0p-53;
  };
  std::vector<GridPoint> g;
  for (int i = 0; i < 100; ++i) {
    GridPoint pt{};
    pt.tier = i % 5;
    pt.eps = 0.01 + 0.98 * u();
    pt.delta = 0.001 + 0.98 * u();
    pt.k = 1 + static_cast<std::uint64_t>(10 * u());
    pt.d = 1 + static_cast<std::uint64_t>(20 * u());
    pt.p = 8 + 4 * static_cast<int>(4 * u());
    pt.b = 0.5 + 10 * u();
    switch (pt.tier) {
      case 0: pt.moment = 1 + 20 * u(); break;               // M4 >= 1
      case 1: pt.moment = 1 + 1e4 * u() * u(); break;        // M_p
      case 2: pt.moment = 1.01 + 5 * u(); break;             // a > 1
      case 3: pt.moment = 1 + 500 * u(); break;              // R^4 / sigma^4
      default: pt.moment = 1 + 1e4 * u(); pt.pdim = 1 + 1e3 * u(); break;
    }
    g.push_back(pt);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Quadrature

/// Far-tail evaluations of polynomial * density can produce inf * 0; the
/// true integrand is 0 there.
inline std::function<double(double)> finite(const std::function<double(double)>& f) {
  return [f](double x) {
    const double v = f(x);
    return std::isfinite(v) ? v : 0.0;
  };
}

/// integral of f over (-inf, inf) by splitting at 0.
inline double integrate_line(const std::function<double(double)>& g) {
  const auto f = finite(g);
  boost::math::quadrature::exp_sinh<double> right;
  const double pos = right.integrate([&](double x) { return f(x); }, 0.0, std::numeric_limits<double>::infinity());
  const double neg = right.integrate([&](double x) { return f(-x); }, 0.0, std::numeric_limits<double>::infinity());
  return pos + neg;
}

inline double integrate_interval(const std::function<double(double)>& g, double a, double b) {
  const auto f = finite(g);
  if (std::isinf(a) || std::isinf(b)) {
    boost::math::quadrature::exp_sinh<double> es;
    if (std::isinf(b) && std::isinf(a)) return integrate_line(f);
    if (std::isinf(b)) return es.integrate([&](double x) { return f(a + x); }, 0.0, std::numeric_limits<double>::infinity());
    return es.integrate([&](double x) { return f(b - x); }, 0.0, std::numeric_limits<double>::infinity());
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, a, b);
}

inline double normal_pdf(double x, double m = 0.0, double s = 1.0) {
  const double z = (x - m) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
}

inline double student_pdf(double x, double nu) {
  return std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * M_PI) *
         std::pow(1 + x * x / nu, -(nu + 1) / 2);
}

/// E[min_j (x - c_j)^2] for a 1-d density supported on [lo, hi], by
/// integrating each Voronoi cell separately (the integrand has kinks at
/// the midpoints).
inline double expected_min_sq(const std::function<double(double)>& pdf, std::vector<double> centers, double lo,
                              double hi) {
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  double total = 0.0;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    double a = j == 0 ? lo : 0.5 * (centers[j - 1] + centers[j]);
    double b = j + 1 == centers.size() ? hi : 0.5 * (centers[j] + centers[j + 1]);
    a = std::max(a, lo);
    b = std::min(b, hi);
    if (!(a < b)) continue;
    const double c = centers[j];
    total += integrate_interval([&](double x) { return (x - c) * (x - c) * pdf(x); }, a, b);
  }
  return total;
}

}  // namespace oracle
