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

// k-means geometry: quantization errors, the normalized loss f_Q, and the
// seeding / Lloyd solvers used to generate candidate solutions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "kmdev/common.hpp"
#include "kmdev/distributions.hpp"
#include "kmdev/rng.hpp"

namespace kmdev {

/// k centers in R^d; duplicates allowed.
class CenterSet {
 public:
  CenterSet() = default;
  explicit CenterSet(Matrix centers) : centers_(std::move(centers)) {
    require(centers_.rows() >= 1, "a center set needs k >= 1");
  }
  static CenterSet scalars(std::vector<double> values) { return CenterSet(Matrix::column(std::move(values))); }
  /// k copies of one point.
  static CenterSet copies(std::span<const double> point, std::size_t k) {
    Matrix m(k, point.size());
    for (std::size_t j = 0; j < k; ++j) std::copy(point.begin(), point.end(), m.row(j).begin());
    return CenterSet(std::move(m));
  }

  std::size_t k() const { return centers_.rows(); }
  std::size_t dim() const { return centers_.cols(); }
  std::span<const double> center(std::size_t j) const { return centers_.row(j); }
  std::span<double> center(std::size_t j) { return centers_.row(j); }
  const Matrix& matrix() const { return centers_; }

  friend bool operator==(const CenterSet&, const CenterSet&) = default;

 private:
  Matrix centers_;
};

inline CenterSet scaled(const CenterSet& q, double lambda) { return CenterSet(scaled(q.matrix(), lambda)); }

struct Nearest {
  std::size_t index = 0;
  double dist2 = 0.0;
};

/// Nearest center; ties go to the lowest index.
inline Nearest nearest(std::span<const double> x, const CenterSet& q) {
  Nearest best{0, squared_distance(x, q.center(0))};
  for (std::size_t j = 1; j < q.k(); ++j) {
    const double d = squared_distance(x, q.center(j));
    if (d < best.dist2) best = {j, d};
  }
  return best;
}

/// d(x,Q)^2 = min_q |x - q|^2.
inline double dist2(std::span<const double> x, const CenterSet& q) {
  require(x.size() == q.dim(), "point and centers differ in dimension");
  return nearest(x, q).dist2;
}

/// phi_X(Q) = (1/|X|) sum_x d(x,Q)^2.
inline double empirical_error(const Matrix& x, const CenterSet& q) {
  require(x.rows() >= 1, "empirical error needs at least one point");
  require(x.cols() == q.dim(), "points and centers differ in dimension");
  return pairwise_sum(0, x.rows(), [&](std::size_t i) { return nearest(x.row(i), q).dist2; }) /
         static_cast<double>(x.rows());
}

/// f_Q(x) = d(x,Q)^2 / (sigma^2/2 + E_P[d(x,Q)^2]/2).
inline double normalized_loss(std::span<const double> x, const CenterSet& q, double sigma2, double expected) {
  require(sigma2 > 0.0 && expected >= 0.0, "normalized loss needs sigma^2 > 0 and E >= 0");
  return dist2(x, q) / (0.5 * sigma2 + 0.5 * expected);
}

// ---------------------------------------------------------------------------
// Expected quantization error

enum class ErrorMode { Analytic, Reference };

namespace detail {

inline double std_normal_pdf(double z) {
  return std::isinf(z) ? 0.0 : std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Phi(b) - Phi(a), evaluated on the tail side to avoid cancellation.
inline double normal_mass(double a, double b) {
  const auto upper = [](double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); };
  if (a >= 0.0) return upper(a) - upper(b);
  if (b <= 0.0) return upper(-b) - upper(-a);
  return 1.0 - upper(-a) - upper(b);
}

/// E[(X - c)^2; lo < X < hi] for X ~ N(m, s^2).
inline double normal_partial(double m, double s, double lo, double hi, double c) {
  const double a = (lo - m) / s, b = (hi - m) / s, g = (c - m) / s;
  const double mass = normal_mass(a, b);
  const double pa = std_normal_pdf(a), pb = std_normal_pdf(b);
  const double za = std::isinf(a) ? 0.0 : a * pa;
  const double zb = std::isinf(b) ? 0.0 : b * pb;
  return s * s * std::max(0.0, (1.0 + g * g) * mass - (zb - za) - 2.0 * g * (pa - pb));
}

inline double student_mass(const boost::math::students_t_distribution<double>& t, double a, double b) {
  using boost::math::cdf;
  using boost::math::complement;
  const auto F = [&](double z) { return std::isinf(z) ? (z > 0 ? 1.0 : 0.0) : cdf(t, z); };
  const auto Q = [&](double z) { return std::isinf(z) ? (z > 0 ? 0.0 : 1.0) : cdf(complement(t, z)); };
  if (a >= 0.0) return Q(a) - Q(b);
  return F(b) - F(a);
}

/// E[(X - c)^2; lo < X < hi] for X = loc + scale * T_nu, nu > 2.
/// Uses  t f_nu(t) = d/dt[-(nu + t^2) f_nu(t) / (nu - 1)]  and
///       t^2 f_nu(t) = nu(nu-1)/(nu-2) g(t) - nu f_nu(t),
/// where g is the density of sqrt(nu/(nu-2)) T_{nu-2}.
inline double student_partial(double nu, double loc, double scale, double lo, double hi, double c) {
  const double a = (lo - loc) / scale, b = (hi - loc) / scale, g = (c - loc) / scale;
  const boost::math::students_t_distribution<double> t(nu), t2(nu - 2.0);
  const double shrink = std::sqrt((nu - 2.0) / nu);
  const auto G = [&](double z) {
    return std::isinf(z) ? 0.0 : -(nu + z * z) / (nu - 1.0) * boost::math::pdf(t, z);
  };
  const double mass = student_mass(t, a, b);
  const double first = G(b) - G(a);
  const double second = nu * (nu - 1.0) / (nu - 2.0) * student_mass(t2, a * shrink, b * shrink) - nu * mass;
  return scale * scale * std::max(0.0, second - 2.0 * g * first + g * g * mass);
}

/// E[(X - c)^2; lo < X < hi] for Pareto(alpha, xm).
inline double pareto_partial(double alpha, double xm, double lo, double hi, double c) {
  const double ulo = std::max(lo / xm, 1.0), uhi = hi / xm, g = c / xm;
  if (!(uhi > ulo)) return 0.0;
  // alpha * integral of (u - g)^2 u^(-alpha-1) du.
  const auto antiderivative = [&](double u) {
    if (std::isinf(u)) return 0.0;
    return alpha * (std::pow(u, 2.0 - alpha) / (2.0 - alpha) - 2.0 * g * std::pow(u, 1.0 - alpha) / (1.0 - alpha) -
                    g * g * std::pow(u, -alpha) / alpha);
  };
  return xm * xm * std::max(0.0, antiderivative(uhi) - antiderivative(ulo));
}

/// E[(X - c)^2; lo < X < hi] for X uniform on [-r, r].
inline double uniform_partial(double r, double lo, double hi, double c) {
  lo = std::max(lo, -r);
  hi = std::min(hi, r);
  if (!(hi > lo)) return 0.0;
  const double u = hi - c, v = lo - c;
  return (u * u * u - v * v * v) / (6.0 * r);
}

/// Partial second moment of a 1-d parametric family about c on (lo, hi).
inline double partial_moment(const DistributionSpec& s, double lo, double hi, double c) {
  switch (s.family) {
    case Family::Gaussian: return normal_partial(s.mean[0], s.scale, lo, hi, c);
    case Family::GaussianMixture: {
      double acc = 0.0;
      for (std::size_t j = 0; j < s.means.size(); ++j)
        acc += s.weights[j] * normal_partial(s.means[j][0], s.scales[j], lo, hi, c);
      return acc;
    }
    case Family::StudentT: return student_partial(s.nu, s.loc, s.scale, lo, hi, c);
    case Family::Pareto: return pareto_partial(s.alpha, s.scale, lo, hi, c);
    case Family::UniformBall: return uniform_partial(0.5 * s.diameter, lo, hi, c);
    default: break;
  }
  throw InvariantError("no partial moment for family");
}

}  // namespace detail

/// True when analytic_expected_error can evaluate k-center solutions.
inline bool analytic_available(const DistributionSpec& spec, std::size_t k) {
  return spec.family == Family::Empirical || k == 1 || spec.dim == 1;
}

/// Closed-form E_P[d(x,Q)^2]. k = 1 uses sigma^2 + |mu - q|^2; in one
/// dimension the Voronoi cells are intervals and each cell's second moment
/// is integrated exactly; an empirical P is summed exactly.
inline double analytic_expected_error(const DistributionSpec& spec, const CenterSet& q) {
  require(q.dim() == spec.dim, "centers and distribution differ in dimension");
  if (spec.family == Family::Empirical) {
    if (!spec.data || spec.data->empty()) throw PreconditionError("no sample loaded");
    return empirical_error(*spec.data, q);
  }
  if (spec.family == Family::Bernoulli) {
    const double one = spec.scale, zero = 0.0;
    return spec.p * dist2({&one, 1}, q) + (1.0 - spec.p) * dist2({&zero, 1}, q);
  }
  if (q.k() == 1) {
    const auto prof = analytic_profile(spec);
    return prof.sigma2 + squared_distance(prof.mu, q.center(0));
  }
  if (spec.dim != 1)
    throw PreconditionError("analytic expected error is unavailable for k >= 2 in d > 1: use reference mode");
  std::vector<double> c(q.matrix().data());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  const double inf = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double lo = j == 0 ? -inf : 0.5 * (c[j - 1] + c[j]);
    const double hi = j + 1 == c.size() ? inf : 0.5 * (c[j] + c[j + 1]);
    total += detail::partial_moment(spec, lo, hi, c[j]);
  }
  return total;
}

/// Reference-sample size used when none is given: max(10^6, 100 m).
inline std::size_t default_reference_size(std::size_t m) { return std::max<std::size_t>(1'000'000, 100 * m); }

/// Stream index reserved for reference samples; experiment cells never use it.
inline constexpr std::uint64_t kReferenceStream = 0xFEFE'0000'0000'0001ULL;

/// E_P[d(x,Q)^2] by closed form, or by the empirical error on a held-out
/// reference sample (drawn from spec when `reference` is null).
inline double expected_error(const DistributionSpec& spec, const CenterSet& q, ErrorMode mode,
                             const Matrix* reference = nullptr) {
  if (mode == ErrorMode::Analytic) return analytic_expected_error(spec, q);
  if (reference) return empirical_error(*reference, q);
  const Matrix ref = sample(spec, default_reference_size(0), derive_seed(0, kReferenceStream));
  return empirical_error(ref, q);
}

/// Expected-error evaluator shared by many candidate evaluations.
class ErrorOracle {
 public:
  static ErrorOracle analytic(DistributionSpec spec) {
    ErrorOracle o;
    o.spec_ = std::move(spec);
    return o;
  }
  static ErrorOracle reference(DistributionSpec spec, std::size_t n, std::uint64_t seed) {
    ErrorOracle o;
    o.reference_ = std::make_shared<const Matrix>(sample(spec, n, derive_seed(seed, kReferenceStream)));
    o.spec_ = std::move(spec);
    return o;
  }
  /// Analytic when available for k centers, reference otherwise.
  static ErrorOracle automatic(DistributionSpec spec, std::size_t k, std::size_t reference_size, std::uint64_t seed) {
    if (analytic_available(spec, k)) return analytic(std::move(spec));
    return reference(std::move(spec), reference_size, seed);
  }

  double operator()(const CenterSet& q) const {
    return reference_ ? empirical_error(*reference_, q) : analytic_expected_error(spec_, q);
  }
  ErrorMode mode() const { return reference_ ? ErrorMode::Reference : ErrorMode::Analytic; }
  std::size_t reference_size() const { return reference_ ? reference_->rows() : 0; }
  const DistributionSpec& spec() const { return spec_; }

  /// Standard error of the reference estimate of E[d(x,mu)^2], relative to
  /// sigma^2: sqrt((M4 - 1) / n). Zero in analytic mode.
  double relative_noise() const {
    if (!reference_) return 0.0;
    const auto prof = analytic_profile(spec_);
    const double m4 = prof.m4hat.value_or(std::numeric_limits<double>::infinity());
    return std::sqrt((m4 - 1.0) / static_cast<double>(reference_->rows()));
  }

 private:
  DistributionSpec spec_;
  std::shared_ptr<const Matrix> reference_;
};

// ---------------------------------------------------------------------------
// Solvers

/// k-means++ seeding: first center uniform, then D^2 sampling.
inline CenterSet kmeanspp(const Matrix& x, std::size_t k, CounterRng& rng) {
  require(k >= 1, "k must be >= 1");
  if (x.rows() < k) throw PreconditionError("insufficient points: need m >= k");
  const std::size_t n = x.rows();
  Matrix centers(k, x.cols());
  auto place = [&](std::size_t j, std::size_t i) {
    std::copy(x.row(i).begin(), x.row(i).end(), centers.row(j).begin());
  };
  place(0, rng.below(n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centers.row(0));
  for (std::size_t j = 1; j < k; ++j) {
    const double total = pairwise_sum(d2);
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (d2[pick] == 0.0) pick = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    } else {
      pick = rng.below(n);
    }
    place(j, pick);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), centers.row(j)));
  }
  return CenterSet(std::move(centers));
}

struct LloydResult {
  CenterSet centers;
  std::vector<double> error_trace;  // phi_X after seeding and after each iteration
  std::size_t iterations = 0;
  bool converged = false;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixed point or max_iters is reached. An emptied cluster is moved to the
/// point farthest from its nearest center.
inline LloydResult lloyd(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100) {
  if (x.rows() < k) throw PreconditionError("insufficient points: need m >= k");
  CounterRng rng(seed);
  LloydResult res{kmeanspp(x, k, rng), {}, 0, false};
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<std::size_t> assign(n, k), members;
  res.error_trace.push_back(empirical_error(x, res.centers));

  for (std::size_t it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest(x.row(i), res.centers).index;
      changed = changed || a != assign[i];
      assign[i] = a;
    }
    if (!changed) {
      res.converged = true;
      break;
    }
    // Bucket point indices by cluster, in index order.
    std::vector<std::size_t> start(k + 1, 0);
    for (std::size_t i = 0; i < n; ++i) ++start[assign[i] + 1];
    for (std::size_t j = 0; j < k; ++j) start[j + 1] += start[j];
    members.assign(n, 0);
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) members[fill[assign[i]]++] = i;

    Matrix next = res.centers.matrix();
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t b = start[j], e = start[j + 1];
      if (b == e) continue;
      for (std::size_t c = 0; c < d; ++c)
        next(j, c) = pairwise_sum(b, e, [&](std::size_t t) { return x(members[t], c); }) / static_cast<double>(e - b);
    }
    res.centers = CenterSet(std::move(next));
    for (std::size_t j = 0; j < k; ++j) {
      if (start[j] != start[j + 1]) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dd = nearest(x.row(i), res.centers).dist2;
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      std::copy(x.row(far).begin(), x.row(far).end(), res.centers.center(j).begin());
    }
    ++res.iterations;
    res.error_trace.push_back(empirical_error(x, res.centers));
  }
  return res;
}

}  // namespace kmdev
