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

// Data-generating distributions on R^d: seeded samplers and closed-form
// moment metadata.
//
// Sampling algorithms are fixed because bit-exact reproducibility is part of
// the contract:
//   gaussian          mean + scale * z, z from PolarNormal
//   bernoulli         scale * [u < p]
//   student-t         loc + scale * F_nu^{-1}(u), Boost.Math quantile
//   pareto            scale * u^(-1/alpha)
//   uniform-ball      d = 1: r * (2u - 1); d > 1: r * u^(1/d) * z / |z|
//   gaussian-mixture  component by inverse CDF of the weights, then gaussian
//   empirical         bootstrap: row below(n)
// Every draw comes from one CounterRng keyed by the caller's seed.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "kmdev/common.hpp"
#include "kmdev/rng.hpp"

namespace kmdev {

enum class Family { Gaussian, Bernoulli, StudentT, Pareto, UniformBall, GaussianMixture, Empirical };

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Bernoulli: return "bernoulli";
    case Family::StudentT: return "student-t";
    case Family::Pareto: return "pareto";
    case Family::UniformBall: return "uniform-ball";
    case Family::GaussianMixture: return "gaussian-mixture";
    case Family::Empirical: return "empirical";
  }
  return "?";
}

/// Parametric model of P. Construct through the named factories, which
/// enforce parameter domains.
struct DistributionSpec {
  Family family = Family::Gaussian;
  std::size_t dim = 1;

  double scale = 1.0;             // gaussian sd per coordinate; support scale otherwise
  std::vector<double> mean;       // gaussian mean (size dim)
  double loc = 0.0;               // student-t location
  double p = 0.5;                 // bernoulli P[x = scale]
  double nu = 0.0;                // student-t degrees of freedom
  double alpha = 0.0;             // pareto shape
  double diameter = 0.0;          // uniform-ball
  std::vector<std::vector<double>> means;  // mixture component means
  std::vector<double> weights;             // mixture weights
  std::vector<double> scales;              // mixture component sd
  std::shared_ptr<const Matrix> data;      // empirical
  std::string source;                      // empirical: originating path, echoed only

  bool scalar() const {
    return family == Family::Bernoulli || family == Family::StudentT || family == Family::Pareto;
  }
  bool parametric() const { return family != Family::Empirical; }

  static DistributionSpec gaussian(std::size_t d, double scale = 1.0, std::vector<double> mean = {}) {
    require(d >= 1, "dimension must be >= 1");
    require(scale > 0 && std::isfinite(scale), "gaussian scale must be positive");
    if (mean.empty()) mean.assign(d, 0.0);
    require(mean.size() == d, "gaussian mean must have d coordinates");
    DistributionSpec s;
    s.family = Family::Gaussian;
    s.dim = d;
    s.scale = scale;
    s.mean = std::move(mean);
    return s;
  }

  static DistributionSpec bernoulli(double p, double scale = 1.0) {
    require(p > 0.0 && p < 1.0, "bernoulli p must lie in (0,1)");
    require(scale > 0 && std::isfinite(scale), "bernoulli scale must be positive");
    DistributionSpec s;
    s.family = Family::Bernoulli;
    s.p = p;
    s.scale = scale;
    return s;
  }

  /// Requires nu > 2 so that sigma^2 is finite; the kurtosis additionally
  /// needs nu > 4 and is omitted from the profile otherwise.
  static DistributionSpec student_t(double nu, double scale = 1.0, double loc = 0.0) {
    require(nu > 2.0 && std::isfinite(nu), "student-t requires nu > 2 (finite variance)");
    require(scale > 0 && std::isfinite(scale), "student-t scale must be positive");
    DistributionSpec s;
    s.family = Family::StudentT;
    s.nu = nu;
    s.scale = scale;
    s.loc = loc;
    return s;
  }

  /// Pareto(alpha, x_m = scale). Requires alpha > 2 (finite variance).
  static DistributionSpec pareto(double alpha, double scale = 1.0) {
    require(alpha > 2.0 && std::isfinite(alpha), "pareto requires alpha > 2 (finite variance)");
    require(scale > 0 && std::isfinite(scale), "pareto scale must be positive");
    DistributionSpec s;
    s.family = Family::Pareto;
    s.alpha = alpha;
    s.scale = scale;
    return s;
  }

  /// Uniform on the origin-centred ball of the given diameter.
  static DistributionSpec uniform_ball(double diameter, std::size_t d) {
    require(d >= 1, "dimension must be >= 1");
    require(diameter > 0 && std::isfinite(diameter), "uniform-ball diameter must be positive");
    DistributionSpec s;
    s.family = Family::UniformBall;
    s.dim = d;
    s.diameter = diameter;
    return s;
  }

  static DistributionSpec mixture(std::vector<std::vector<double>> means, std::vector<double> weights,
                                  std::vector<double> scales) {
    require(!means.empty(), "mixture needs at least one component");
    const std::size_t d = means.front().size();
    require(d >= 1, "dimension must be >= 1");
    require(weights.size() == means.size(), "mixture weights must match components");
    if (scales.size() == 1 && means.size() > 1) scales.assign(means.size(), scales.front());
    require(scales.size() == means.size(), "mixture scales must match components");
    double total = 0.0;
    for (std::size_t j = 0; j < means.size(); ++j) {
      require(means[j].size() == d, "mixture means must share a dimension");
      require(weights[j] > 0.0, "mixture weights must be positive");
      require(scales[j] > 0.0, "mixture scales must be positive");
      total += weights[j];
    }
    require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");
    DistributionSpec s;
    s.family = Family::GaussianMixture;
    s.dim = d;
    s.means = std::move(means);
    s.weights = std::move(weights);
    s.scales = std::move(scales);
    return s;
  }

  static DistributionSpec empirical(Matrix sample, std::string source = {}) {
    DistributionSpec s;
    s.family = Family::Empirical;
    s.dim = sample.cols() == 0 ? 1 : sample.cols();
    if (!sample.empty()) s.data = std::make_shared<const Matrix>(std::move(sample));
    s.source = std::move(source);
    return s;
  }
};

/// Distribution of lambda * x for x ~ spec.
inline DistributionSpec scaled(const DistributionSpec& spec, double lambda) {
  require(lambda > 0 && std::isfinite(lambda), "scale factor must be positive");
  DistributionSpec s = spec;
  switch (spec.family) {
    case Family::Gaussian:
      s.scale *= lambda;
      for (double& v : s.mean) v *= lambda;
      break;
    case Family::Bernoulli:
    case Family::Pareto:
      s.scale *= lambda;
      break;
    case Family::StudentT:
      s.scale *= lambda;
      s.loc *= lambda;
      break;
    case Family::UniformBall:
      s.diameter *= lambda;
      break;
    case Family::GaussianMixture:
      for (auto& m : s.means)
        for (double& v : m) v *= lambda;
      for (double& v : s.scales) v *= lambda;
      break;
    case Family::Empirical:
      if (spec.data) s.data = std::make_shared<const Matrix>(kmdev::scaled(*spec.data, lambda));
      break;
  }
  return s;
}

/// Population moments of d(x, mu). Absent fields mean "no closed form" or
/// "infinite".
struct MomentProfile {
  std::vector<double> mu;
  double sigma2 = 0.0;
  std::optional<double> m4hat;
  std::map<int, double> mphat;  // p -> E[d^p] / sigma^p
  std::optional<std::pair<double, double>> subgauss;  // (a, b)
  std::optional<double> diameter;
};

/// Throws InvariantError if the profile breaks a moment inequality.
inline void check_profile(const MomentProfile& prof, double rel_tol = 1e-9) {
  if (!(prof.sigma2 > 0.0 && std::isfinite(prof.sigma2)))
    throw InvariantError("profile: sigma^2 must lie in (0, inf)");
  if (prof.m4hat) {
    const double m4 = *prof.m4hat;
    if (!(m4 >= 1.0 - rel_tol)) throw InvariantError("profile: kurtosis below 1");
    for (const auto& [p, mp] : prof.mphat)
      if (m4 > std::pow(mp, 4.0 / p) * (1.0 + rel_tol))
        throw InvariantError("profile: Hoelder chain M4 <= Mp^(4/p) violated at p=" + std::to_string(p));
    if (prof.diameter) {
      const double r4 = std::pow(*prof.diameter, 4) / (prof.sigma2 * prof.sigma2);
      if (m4 > r4 * (1.0 + rel_tol)) throw InvariantError("profile: kurtosis exceeds R^4/sigma^4");
    }
  }
  if (prof.subgauss && !(prof.subgauss->first > 1.0 && prof.subgauss->second > 0.0))
    throw InvariantError("profile: subgaussian certificate needs a > 1, b > 0");
}

namespace detail {

inline constexpr int kProfileOrders[] = {4, 8, 12, 16, 20, 24};

// E[x^r] for Pareto(alpha, 1), r < alpha.
inline long double pareto_raw(double alpha, int r) { return alpha / static_cast<long double>(alpha - r); }

inline double pareto_central(double alpha, int p) {
  const long double mu = pareto_raw(alpha, 1);
  long double s = 0.0L, binom = 1.0L;
  for (int j = 0; j <= p; ++j) {
    s += binom * pareto_raw(alpha, j) * std::pow(-mu, static_cast<long double>(p - j));
    binom = binom * (p - j) / (j + 1);
  }
  return static_cast<double>(s);
}

inline double two_point_abs_moment(double p, int order) {
  // d(x, mu) is (1 - p) with probability p and p with probability 1 - p.
  return p * std::pow(1.0 - p, order) + (1.0 - p) * std::pow(p, order);
}

}  // namespace detail

/// Closed-form moment profile of a parametric family.
inline MomentProfile analytic_profile(const DistributionSpec& spec) {
  require(spec.parametric(), "analytic profile requires a parametric family");
  MomentProfile prof;
  switch (spec.family) {
    case Family::Gaussian: {
      const double d = static_cast<double>(spec.dim);
      prof.mu = spec.mean;
      prof.sigma2 = d * spec.scale * spec.scale;
      // |z|^2 is chi-square with d degrees of freedom.
      for (int p : detail::kProfileOrders) {
        const double h = 0.5 * p;
        prof.mphat[p] = std::exp(h * std::log(2.0) + std::lgamma(0.5 * d + h) - std::lgamma(0.5 * d) - h * std::log(d));
      }
      prof.m4hat = 1.0 + 2.0 / d;
      prof.mphat[4] = *prof.m4hat;
      if (spec.dim == 1)
        prof.subgauss = std::pair{2.0, 4.0};
      else
        prof.subgauss = std::pair{std::exp(0.5), 16.0};
      break;
    }
    case Family::Bernoulli: {
      const double p = spec.p;
      const double var = p * (1.0 - p);
      prof.mu = {spec.scale * p};
      prof.sigma2 = spec.scale * spec.scale * var;
      for (int q : detail::kProfileOrders) prof.mphat[q] = detail::two_point_abs_moment(p, q) / std::pow(var, 0.5 * q);
      prof.m4hat = ((1.0 - p) * (1.0 - p) * (1.0 - p) + p * p * p) / var;
      prof.mphat[4] = *prof.m4hat;
      prof.diameter = spec.scale;
      const double reach = std::max(p, 1.0 - p) / std::sqrt(var);
      prof.subgauss = std::pair{std::numbers::e, std::pow(reach, 4)};
      break;
    }
    case Family::StudentT: {
      const double nu = spec.nu;
      const double var1 = nu / (nu - 2.0);
      prof.mu = {spec.loc};
      prof.sigma2 = spec.scale * spec.scale * var1;
      for (int p : detail::kProfileOrders) {
        if (p >= nu) break;
        const double abs_moment = std::exp(0.5 * p * std::log(nu) + std::lgamma(0.5 * (p + 1)) +
                                           std::lgamma(0.5 * (nu - p)) - 0.5 * std::log(std::numbers::pi) -
                                           std::lgamma(0.5 * nu));
        prof.mphat[p] = abs_moment / std::pow(var1, 0.5 * p);
      }
      if (nu > 4.0) {
        prof.m4hat = 3.0 * (nu - 2.0) / (nu - 4.0);
        prof.mphat[4] = *prof.m4hat;
      }
      break;
    }
    case Family::Pareto: {
      const double a = spec.alpha;
      const double xm = spec.scale;
      const double var1 = a / ((a - 1.0) * (a - 1.0) * (a - 2.0));
      prof.mu = {xm * a / (a - 1.0)};
      prof.sigma2 = xm * xm * var1;
      for (int p : detail::kProfileOrders) {
        if (p >= a) break;
        prof.mphat[p] = detail::pareto_central(a, p) / std::pow(var1, 0.5 * p);
      }
      if (a > 4.0) {
        prof.m4hat = 3.0 * (a - 2.0) * (3.0 * a * a + a + 2.0) / (a * (a - 3.0) * (a - 4.0));
        prof.mphat[4] = *prof.m4hat;
      }
      break;
    }
    case Family::UniformBall: {
      const double d = static_cast<double>(spec.dim);
      const double r = 0.5 * spec.diameter;
      // |x| has density proportional to rho^(d-1) on [0, r]: E|x|^q = d r^q / (d + q).
      prof.mu.assign(spec.dim, 0.0);
      prof.sigma2 = d * r * r / (d + 2.0);
      for (int p : detail::kProfileOrders) prof.mphat[p] = (d / (d + p)) / std::pow(d / (d + 2.0), 0.5 * p);
      prof.m4hat = (d + 2.0) * (d + 2.0) / (d * (d + 4.0));
      prof.mphat[4] = *prof.m4hat;
      prof.diameter = spec.diameter;
      prof.subgauss = std::pair{std::numbers::e, std::pow((d + 2.0) / d, 2)};
      break;
    }
    case Family::GaussianMixture: {
      const std::size_t d = spec.dim;
      const double dd = static_cast<double>(d);
      prof.mu.assign(d, 0.0);
      for (std::size_t j = 0; j < spec.means.size(); ++j)
        for (std::size_t c = 0; c < d; ++c) prof.mu[c] += spec.weights[j] * spec.means[j][c];
      double second = 0.0, fourth = 0.0;
      for (std::size_t j = 0; j < spec.means.size(); ++j) {
        const double a = squared_distance(spec.means[j], prof.mu);
        const double s2 = spec.scales[j] * spec.scales[j];
        second += spec.weights[j] * (a + dd * s2);
        // E|c + s z|^4 = |c|^4 + 4 s^2 |c|^2 + 2 d s^2 |c|^2 + s^4 d (d + 2)
        fourth += spec.weights[j] * (a * a + (4.0 + 2.0 * dd) * s2 * a + s2 * s2 * dd * (dd + 2.0));
      }
      prof.sigma2 = second;
      prof.m4hat = fourth / (second * second);
      prof.mphat[4] = *prof.m4hat;
      break;
    }
    case Family::Empirical:
      break;
  }
  return prof;
}

/// n i.i.d. draws of spec, keyed by seed.
inline Matrix sample(const DistributionSpec& spec, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "sample size must be >= 1");
  CounterRng rng(seed);
  const std::size_t d = spec.dim;
  Matrix out(n, d);
  switch (spec.family) {
    case Family::Gaussian: {
      PolarNormal normal;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) out(i, c) = spec.mean[c] + spec.scale * normal(rng);
      break;
    }
    case Family::Bernoulli:
      for (std::size_t i = 0; i < n; ++i) out(i, 0) = rng.uniform() < spec.p ? spec.scale : 0.0;
      break;
    case Family::StudentT: {
      const boost::math::students_t_distribution<double> t(spec.nu);
      for (std::size_t i = 0; i < n; ++i) out(i, 0) = spec.loc + spec.scale * boost::math::quantile(t, rng.uniform_open());
      break;
    }
    case Family::Pareto:
      for (std::size_t i = 0; i < n; ++i) out(i, 0) = spec.scale * std::pow(rng.uniform_open(), -1.0 / spec.alpha);
      break;
    case Family::UniformBall: {
      const double r = 0.5 * spec.diameter;
      if (d == 1) {
        for (std::size_t i = 0; i < n; ++i) out(i, 0) = r * (2.0 * rng.uniform() - 1.0);
        break;
      }
      PolarNormal normal;
      std::vector<double> z(d);
      for (std::size_t i = 0; i < n; ++i) {
        double norm2;
        do {
          norm2 = 0.0;
          for (double& v : z) {
            v = normal(rng);
            norm2 += v * v;
          }
        } while (norm2 == 0.0);
        const double radius = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / std::sqrt(norm2);
        for (std::size_t c = 0; c < d; ++c) out(i, c) = radius * z[c];
      }
      break;
    }
    case Family::GaussianMixture: {
      PolarNormal normal;
      const std::size_t last = spec.weights.size() - 1;
      for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        std::size_t j = 0;
        double acc = spec.weights[0];
        while (j < last && u >= acc) acc += spec.weights[++j];
        for (std::size_t c = 0; c < d; ++c) out(i, c) = spec.means[j][c] + spec.scales[j] * normal(rng);
      }
      break;
    }
    case Family::Empirical: {
      if (!spec.data || spec.data->empty()) throw PreconditionError("no sample loaded");
      const Matrix& src = *spec.data;
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = src.row(rng.below(src.rows()));
        std::copy(row.begin(), row.end(), out.row(i).begin());
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text formats

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline double to_double(std::string_view s, std::string_view what) {
  const auto v = parse_double(s);
  if (!v) throw UsageError("cannot parse '" + std::string(s) + "' as a number for " + std::string(what));
  return *v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline std::vector<double> to_vector(std::string_view s, char sep, std::string_view what) {
  std::vector<double> v;
  for (auto part : split(s, sep)) v.push_back(to_double(part, what));
  return v;
}

inline std::string join(const std::vector<double>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += fmt_double(v[i]);
  }
  return out;
}

}  // namespace detail

/// Reads one point per line, comma separated. A first line that does not
/// parse as numbers is treated as a header.
inline Matrix load_csv(std::istream& in) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    std::vector<double> row;
    bool numeric = true;
    for (auto field : detail::split(body, ',')) {
      const auto v = detail::parse_double(field);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw UsageError("csv line " + std::to_string(line_no) + ": non-numeric field");
    }
    first = false;
    if (cols == 0) cols = row.size();
    if (row.size() != cols)
      throw UsageError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(cols) + " columns");
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

inline Matrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  return load_csv(in);
}

/// Parses `family:key=val,...`, e.g. `gaussian:d=2,scale=3`,
/// `student-t:nu=5`, `gaussian-mixture:means=-2;2,weights=0.5;0.5,scale=1`.
/// Mixture means separate components with ';' and coordinates with '_'.
inline DistributionSpec parse_distribution(std::string_view text) {
  text = detail::trim(text);
  const std::size_t colon = text.find(':');
  const std::string family(text.substr(0, colon));
  std::map<std::string, std::string, std::less<>> kv;
  if (colon != std::string_view::npos && colon + 1 < text.size()) {
    // Commas separate keys; ';' inside mixture lists never contains '='.
    for (auto item : detail::split(text.substr(colon + 1), ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      const std::size_t eq = item.find('=');
      if (eq == std::string_view::npos) throw UsageError("distribution parameter '" + std::string(item) + "' lacks '='");
      kv[std::string(detail::trim(item.substr(0, eq)))] = std::string(detail::trim(item.substr(eq + 1)));
    }
  }
  auto take = [&](std::string_view key, double fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const double v = detail::to_double(it->second, key);
    kv.erase(it);
    return v;
  };
  auto take_dim = [&](double fallback) {
    const double d = take("d", fallback);
    if (!(d >= 1.0 && d == std::floor(d))) throw PreconditionError("dimension must be a positive integer");
    return static_cast<std::size_t>(d);
  };
  auto finish = [&](DistributionSpec s) {
    if (!kv.empty()) throw UsageError("unknown parameter '" + kv.begin()->first + "' for " + family);
    return s;
  };

  if (family == "gaussian" || family == "isotropic-gaussian" || family == "normal") {
    const std::size_t d = take_dim(1);
    const double sc = take("scale", 1.0);
    std::vector<double> mean;
    if (auto it = kv.find("mean"); it != kv.end()) {
      mean = detail::to_vector(it->second, '_', "mean");
      if (mean.size() == 1 && d > 1) mean.assign(d, mean.front());
      kv.erase(it);
    }
    return finish(DistributionSpec::gaussian(d, sc, std::move(mean)));
  }
  if (family == "bernoulli" || family == "bernoulli-scalar") {
    const double p = take("p", 0.5);
    const double sc = take("scale", 1.0);
    if (take("d", 1.0) != 1.0) throw PreconditionError("scalar families require d = 1");
    return finish(DistributionSpec::bernoulli(p, sc));
  }
  if (family == "student-t" || family == "student-t-scalar" || family == "t") {
    const double nu = take("nu", 5.0);
    const double sc = take("scale", 1.0);
    const double loc = take("loc", 0.0);
    if (take("d", 1.0) != 1.0) throw PreconditionError("scalar families require d = 1");
    return finish(DistributionSpec::student_t(nu, sc, loc));
  }
  if (family == "pareto" || family == "pareto-scalar") {
    const double a = take("alpha", 5.0);
    const double sc = take("scale", 1.0);
    if (take("d", 1.0) != 1.0) throw PreconditionError("scalar families require d = 1");
    return finish(DistributionSpec::pareto(a, sc));
  }
  if (family == "uniform-ball" || family == "ball") {
    const double r = take("R", 1.0);
    const std::size_t d = take_dim(1);
    return finish(DistributionSpec::uniform_ball(r, d));
  }
  if (family == "gaussian-mixture" || family == "mixture") {
    std::vector<std::vector<double>> means;
    std::vector<double> weights, scales{1.0};
    if (auto it = kv.find("means"); it != kv.end()) {
      for (auto comp : detail::split(it->second, ';')) means.push_back(detail::to_vector(comp, '_', "means"));
      kv.erase(it);
    } else {
      throw UsageError("gaussian-mixture needs means=");
    }
    if (auto it = kv.find("weights"); it != kv.end()) {
      weights = detail::to_vector(it->second, ';', "weights");
      kv.erase(it);
    } else {
      weights.assign(means.size(), 1.0 / static_cast<double>(means.size()));
    }
    if (auto it = kv.find("scale"); it != kv.end()) {
      scales = detail::to_vector(it->second, ';', "scale");
      kv.erase(it);
    }
    if (kv.count("d")) {
      const std::size_t d = take_dim(1);
      if (!means.empty() && means.front().size() != d) throw PreconditionError("mixture means do not match d");
    }
    return finish(DistributionSpec::mixture(std::move(means), std::move(weights), std::move(scales)));
  }
  if (family == "empirical") {
    const auto it = kv.find("path");
    if (it == kv.end()) return finish(DistributionSpec::empirical(Matrix{}));
    const std::string path = it->second;
    kv.erase(it);
    return finish(DistributionSpec::empirical(load_csv(path), path));
  }
  throw UsageError("unknown distribution family '" + family + "'");
}

/// Canonical string form; parse_distribution(to_string(s)) reproduces s.
inline std::string to_string(const DistributionSpec& s) {
  using detail::fmt_double;
  std::string out(family_name(s.family));
  out += ':';
  switch (s.family) {
    case Family::Gaussian:
      out += "d=" + std::to_string(s.dim) + ",scale=" + fmt_double(s.scale) + ",mean=" + detail::join(s.mean, '_');
      break;
    case Family::Bernoulli:
      out += "p=" + fmt_double(s.p) + ",scale=" + fmt_double(s.scale);
      break;
    case Family::StudentT:
      out += "nu=" + fmt_double(s.nu) + ",scale=" + fmt_double(s.scale) + ",loc=" + fmt_double(s.loc);
      break;
    case Family::Pareto:
      out += "alpha=" + fmt_double(s.alpha) + ",scale=" + fmt_double(s.scale);
      break;
    case Family::UniformBall:
      out += "R=" + fmt_double(s.diameter) + ",d=" + std::to_string(s.dim);
      break;
    case Family::GaussianMixture: {
      out += "means=";
      for (std::size_t j = 0; j < s.means.size(); ++j) {
        if (j) out += ';';
        out += detail::join(s.means[j], '_');
      }
      out += ",weights=" + detail::join(s.weights, ';') + ",scale=" + detail::join(s.scales, ';');
      break;
    }
    case Family::Empirical:
      if (!s.source.empty()) out += "path=" + s.source;
      break;
  }
  if (out.back() == ':') out.pop_back();
  return out;
}

}  // namespace kmdev
