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

// Monte Carlo harness for the uniform deviation sup_Q |phi_X(Q) - E_P[d(x,Q)^2]|.
//
// The supremum over Q is approximated by a family of candidate center sets
// per cell, so every reported statistic is a lower bound on the true sup.
// Each (m, replicate) cell owns a seed derived from (master_seed, m,
// replicate); cells may run on any number of threads and the records are
// always assembled in grid order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "kmdev/common.hpp"
#include "kmdev/distributions.hpp"
#include "kmdev/moments.hpp"
#include "kmdev/quantization.hpp"
#include "kmdev/rng.hpp"

namespace kmdev {

struct ExperimentConfig {
  DistributionSpec spec = DistributionSpec::gaussian(1);
  std::size_t k = 1;
  std::vector<std::size_t> m_grid = {128, 256, 512, 1024, 2048, 4096, 8192, 16384};
  std::size_t replicates = 20;
  std::size_t candidates_per_cell = 4;
  std::uint64_t master_seed = 1;
  bool restrict_to_unit = true;
  std::size_t reference_size = 0;  // 0: max(10^6, 100 * max(m_grid))
  std::size_t lloyd_iters = 100;
  std::size_t threads = 1;

  std::size_t resolved_reference_size() const {
    const std::size_t top = m_grid.empty() ? 0 : *std::max_element(m_grid.begin(), m_grid.end());
    return reference_size ? reference_size : default_reference_size(top);
  }

  void validate() const {
    require(k >= 1, "k must be >= 1");
    require(replicates >= 1, "replicates must be >= 1");
    require(!m_grid.empty(), "m_grid must not be empty");
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
      require(m_grid[i] >= std::max<std::size_t>(k, 2), "every grid m must be >= max(k, 2)");
      require(i == 0 || m_grid[i] > m_grid[i - 1], "m_grid must be strictly increasing");
    }
  }
};

enum class CandidateKind { PopulationMean, SampleMean, RandomFromP, KmeansPP, Lloyd, PerturbSmall, PerturbLarge };

inline std::string_view kind_name(CandidateKind k) {
  switch (k) {
    case CandidateKind::PopulationMean: return "population-mean";
    case CandidateKind::SampleMean: return "sample-mean";
    case CandidateKind::RandomFromP: return "random-from-p";
    case CandidateKind::KmeansPP: return "kmeans++";
    case CandidateKind::Lloyd: return "lloyd";
    case CandidateKind::PerturbSmall: return "lloyd-perturb-0.1";
    case CandidateKind::PerturbLarge: return "lloyd-perturb-1";
  }
  return "?";
}

struct Candidate {
  CandidateKind kind;
  CenterSet centers;
};

struct DeviationRecord {
  std::size_t m = 0;
  std::size_t replicate = 0;
  double delta_abs = 0.0;   // max |phi - E| over candidates with E <= sigma^2
  double delta_norm = 0.0;  // max |phi - E| / (sigma^2/2 + E/2) over all candidates
  CandidateKind argmax_kind = CandidateKind::PopulationMean;
  std::size_t argmax_index = 0;
  std::uint64_t seed = 0;   // cell seed
  std::size_t retries = 0;  // degenerate samples redrawn
  std::size_t candidates = 0;

  friend bool operator==(const DeviationRecord&, const DeviationRecord&) = default;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of y on x.
inline RateFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "fit needs paired values");
  require(x.size() >= 4, "rate fit needs at least 4 grid points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "rate fit needs distinct m values");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  f.stderr_slope = std::sqrt(sse / (n - 2.0) / sxx);
  return f;
}

/// Fit of ln(value) against ln(m).
inline RateFit fit_rate(std::span<const std::size_t> m, std::span<const double> value) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < m.size(); ++i) {
    require(value[i] > 0.0, "rate fit needs positive deviations");
    lx.push_back(std::log(static_cast<double>(m[i])));
    ly.push_back(std::log(value[i]));
  }
  return fit_line(lx, ly);
}

inline std::uint64_t cell_seed(std::uint64_t master, std::size_t m, std::size_t replicate) {
  return derive_seed(derive_seed(master, m), replicate);
}

namespace detail {

inline constexpr std::size_t kMaxRetries = 3;

inline CenterSet perturbed(const CenterSet& base, double radius, CounterRng& rng) {
  PolarNormal normal;
  Matrix m = base.matrix();
  const double per_coord = radius / std::sqrt(static_cast<double>(m.cols()));
  for (double& v : m.data()) v += per_coord * normal(rng);
  return CenterSet(std::move(m));
}

}  // namespace detail

/// Candidate solutions for one sample, in a fixed order: population mean
/// (k copies), sample mean (k = 1 only), then for i < candidates_per_cell
/// the quintuple random-from-P, k-means++, Lloyd, Lloyd + 0.1 sigma noise,
/// Lloyd + sigma noise. Candidate i uses streams keyed by i alone, so a
/// larger candidates_per_cell extends the list without changing its prefix.
inline std::vector<Candidate> build_candidates(const ExperimentConfig& cfg, const MomentProfile& prof,
                                               const Matrix& x, std::uint64_t sample_seed) {
  std::vector<Candidate> out;
  out.push_back({CandidateKind::PopulationMean, CenterSet::copies(prof.mu, cfg.k)});
  if (cfg.k == 1) out.push_back({CandidateKind::SampleMean, CenterSet(Matrix(1, x.cols(), column_mean(x)))});
  const double sigma = std::sqrt(prof.sigma2);
  for (std::size_t i = 0; i < cfg.candidates_per_cell; ++i) {
    const std::uint64_t base = derive_seed(sample_seed, 1000 + i);
    out.push_back({CandidateKind::RandomFromP, CenterSet(sample(cfg.spec, cfg.k, derive_seed(base, 1)))});
    CounterRng pp_rng(derive_seed(base, 2));
    out.push_back({CandidateKind::KmeansPP, kmeanspp(x, cfg.k, pp_rng)});
    auto fitted = lloyd(x, cfg.k, derive_seed(base, 3), cfg.lloyd_iters).centers;
    CounterRng noise_small(derive_seed(base, 4)), noise_large(derive_seed(base, 5));
    auto small = detail::perturbed(fitted, 0.1 * sigma, noise_small);
    auto large = detail::perturbed(fitted, sigma, noise_large);
    out.push_back({CandidateKind::Lloyd, std::move(fitted)});
    out.push_back({CandidateKind::PerturbSmall, std::move(small)});
    out.push_back({CandidateKind::PerturbLarge, std::move(large)});
  }
  return out;
}

/// Population profile used for sigma^2 and mu: closed form for parametric
/// families, the loaded data's plug-in moments for an empirical one.
inline MomentProfile population_profile(const DistributionSpec& spec) {
  if (spec.parametric()) return analytic_profile(spec);
  if (!spec.data || spec.data->empty()) throw PreconditionError("no sample loaded");
  const auto em = estimate_moments(*spec.data);
  MomentProfile prof;
  prof.mu = em.mu_hat;
  prof.sigma2 = em.sigma2_hat;
  prof.m4hat = em.m4hat_hat;
  return prof;
}

/// Relative tolerance on E <= sigma^2 for the restricted candidate set.
inline double restriction_tolerance(const ErrorOracle& oracle) {
  return std::max(1e-12, 4.0 * oracle.relative_noise());
}

/// One (m, replicate) cell against a prepared oracle.
inline DeviationRecord measure_cell(const ExperimentConfig& cfg, const ErrorOracle& oracle,
                                    const MomentProfile& prof, std::size_t m, std::size_t replicate) {
  DeviationRecord rec;
  rec.m = m;
  rec.replicate = replicate;
  rec.seed = cell_seed(cfg.master_seed, m, replicate);

  Matrix x;
  std::uint64_t sample_seed = 0;
  for (std::size_t attempt = 0;; ++attempt) {
    sample_seed = derive_seed(rec.seed, attempt);
    x = sample(cfg.spec, m, sample_seed);
    if (detail::sample_variance(x) > 0.0) break;
    if (attempt == detail::kMaxRetries)
      throw PreconditionError("degenerate: zero-variance sample in cell m=" + std::to_string(m) +
                              " replicate=" + std::to_string(replicate) + " after " +
                              std::to_string(detail::kMaxRetries) + " retries");
    ++rec.retries;
  }

  const auto candidates = build_candidates(cfg, prof, x, sample_seed);
  rec.candidates = candidates.size();
  const double limit = prof.sigma2 * (1.0 + restriction_tolerance(oracle));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double e = oracle(candidates[i].centers);
    const double phi = empirical_error(x, candidates[i].centers);
    const double dev = std::abs(phi - e);
    const double norm = dev / (0.5 * prof.sigma2 + 0.5 * e);
    if (i == 0 || norm > rec.delta_norm) {
      rec.delta_norm = norm;
      rec.argmax_kind = candidates[i].kind;
      rec.argmax_index = i;
    }
    if ((!cfg.restrict_to_unit || e <= limit) && dev > rec.delta_abs) rec.delta_abs = dev;
  }
  return rec;
}

inline ErrorOracle make_oracle(const ExperimentConfig& cfg) {
  return ErrorOracle::automatic(cfg.spec, cfg.k, cfg.resolved_reference_size(), cfg.master_seed);
}

/// Convenience overload building the oracle for a single cell.
inline DeviationRecord measure_cell(const ExperimentConfig& cfg, std::size_t m, std::size_t replicate) {
  cfg.validate();
  return measure_cell(cfg, make_oracle(cfg), population_profile(cfg.spec), m, replicate);
}

struct SweepResult {
  std::vector<DeviationRecord> records;  // m-major, replicate-minor
  std::vector<double> mean_delta_norm;   // per grid m
  std::vector<double> mean_delta_abs;
  RateFit fit;                           // ln(mean delta_norm) vs ln m
  std::vector<RateFit> replicate_fits;   // ln(delta_norm) vs ln m per replicate
  ErrorMode oracle_mode = ErrorMode::Analytic;
  std::size_t reference_size = 0;
  double oracle_relative_noise = 0.0;
};

/// Runs every cell of the grid. fit is computed only when the grid has at
/// least 4 points.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto oracle = make_oracle(cfg);
  const auto prof = population_profile(cfg.spec);
  const std::size_t reps = cfg.replicates, cells = cfg.m_grid.size() * reps;

  SweepResult res;
  res.records.resize(cells);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c; (c = next.fetch_add(1)) < cells;) {
      try {
        res.records[c] = measure_cell(cfg, oracle, prof, cfg.m_grid[c / reps], c % reps);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(cfg.threads, 1, cells);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t g = 0; g < cfg.m_grid.size(); ++g) {
    double sn = 0.0, sa = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      sn += res.records[g * reps + r].delta_norm;
      sa += res.records[g * reps + r].delta_abs;
    }
    res.mean_delta_norm.push_back(sn / static_cast<double>(reps));
    res.mean_delta_abs.push_back(sa / static_cast<double>(reps));
  }
  if (cfg.m_grid.size() >= 4) {
    res.fit = fit_rate(cfg.m_grid, res.mean_delta_norm);
    for (std::size_t r = 0; r < reps; ++r) {
      std::vector<double> v;
      for (std::size_t g = 0; g < cfg.m_grid.size(); ++g) v.push_back(res.records[g * reps + r].delta_norm);
      if (std::all_of(v.begin(), v.end(), [](double d) { return d > 0.0; }))
        res.replicate_fits.push_back(fit_rate(cfg.m_grid, v));
    }
  }
  res.oracle_mode = oracle.mode();
  res.reference_size = oracle.reference_size();
  res.oracle_relative_noise = oracle.relative_noise();
  return res;
}

/// Sweep plus rate fit; requires at least 4 grid points.
inline SweepResult rate_sweep(const ExperimentConfig& cfg) {
  require(cfg.m_grid.size() >= 4, "rate sweep needs at least 4 grid points");
  return run_sweep(cfg);
}

// ---------------------------------------------------------------------------
// Impossibility constructions

struct ScalingReport {
  double lambda = 1.0;
  std::size_t m = 0;
  double epsilon = 0.1;
  double base_deviation = 0.0;    // a
  double scaled_deviation = 0.0;  // deviation for the lambda-scaled pair
  double ratio = 0.0;
  double expected_ratio = 0.0;    // lambda^2
  double rel_error = 0.0;
  double lambda_threshold = 0.0;  // 1 / sqrt(a epsilon)
  bool exceeds_epsilon = false;   // scaled deviation > epsilon
  bool pass = false;              // ratio matches lambda^2 to 1e-6
};

/// Absolute deviations scale by lambda^2 when P and Q are scaled by lambda,
/// so no fixed absolute tolerance can hold for every scaling of P.
inline ScalingReport counterexample_scaling(double lambda, const ExperimentConfig& base, double epsilon = 0.1) {
  require(lambda > 0.0 && std::isfinite(lambda), "scaling counterexample needs lambda > 0");
  require(epsilon > 0.0 && epsilon < 1.0, "requires epsilon in (0,1)");
  ScalingReport rep;
  rep.lambda = lambda;
  rep.epsilon = epsilon;
  rep.m = base.m_grid.front();
  ExperimentConfig scaled_cfg = base;
  scaled_cfg.spec = scaled(base.spec, lambda);
  rep.base_deviation = measure_cell(base, rep.m, 0).delta_abs;
  rep.scaled_deviation = measure_cell(scaled_cfg, rep.m, 0).delta_abs;
  require(rep.base_deviation > 0.0, "scaling counterexample needs a nonzero base deviation");
  rep.ratio = rep.scaled_deviation / rep.base_deviation;
  rep.expected_ratio = lambda * lambda;
  rep.rel_error = std::abs(rep.ratio / rep.expected_ratio - 1.0);
  rep.lambda_threshold = 1.0 / std::sqrt(rep.base_deviation * epsilon);
  rep.exceeds_epsilon = rep.scaled_deviation > epsilon;
  rep.pass = rep.rel_error <= 1e-6;
  return rep;
}

struct DivergencePoint {
  double q = 0.0;
  double direct = 0.0;    // |phi_X({q}) - (sigma^2 + q^2)|
  double identity = 0.0;  // |phi_X({mu_hat}) - sigma^2 + mu_hat^2 - 2 q mu_hat|
  double rel_error = 0.0;
};

struct DivergenceReport {
  double mu_hat = 0.0;
  double sigma2 = 0.0;
  std::vector<DivergencePoint> points;
  double max_rel_error = 0.0;
  double measured_slope = 0.0;
  double expected_slope = 0.0;  // 2 |mu_hat|
  double slope_rel_error = 0.0;
  bool degenerate = false;
  std::string message;
  bool pass = false;
};

/// For a zero-mean P with variance sigma2, |phi_X({q}) - E_P[(x-q)^2]| grows
/// linearly in |q| with slope 2|mu_hat|. The slope is measured between the
/// two largest grid values of q.
inline DivergenceReport counterexample_divergence(const Matrix& x, std::span<const double> q_grid, double sigma2) {
  require(x.cols() == 1, "divergence counterexample needs a 1-dimensional sample");
  require(x.rows() >= 1, "empty sample");
  require(sigma2 > 0.0, "requires sigma^2 > 0");
  require(q_grid.size() >= 2, "need at least two q values");
  DivergenceReport rep;
  rep.sigma2 = sigma2;
  rep.mu_hat = column_mean(x)[0];
  const double mu = rep.mu_hat;
  const double phi_mu = empirical_error(x, CenterSet::scalars({mu}));
  for (double q : q_grid) {
    DivergencePoint pt{q, 0.0, 0.0, 0.0};
    pt.direct = std::abs(empirical_error(x, CenterSet::scalars({q})) - (sigma2 + q * q));
    pt.identity = std::abs(phi_mu - sigma2 + mu * mu - 2.0 * q * mu);
    pt.rel_error = std::abs(pt.direct - pt.identity) / std::max({pt.direct, pt.identity, sigma2});
    rep.max_rel_error = std::max(rep.max_rel_error, pt.rel_error);
    rep.points.push_back(pt);
  }
  rep.expected_slope = 2.0 * std::abs(mu);
  if (mu == 0.0) {
    rep.degenerate = true;
    rep.message = "degenerate: divergence slope zero";
    rep.pass = rep.max_rel_error <= 1e-9;
    return rep;
  }
  std::vector<DivergencePoint> sorted = rep.points;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.q < b.q; });
  const auto& hi = sorted.back();
  const auto& lo = sorted[sorted.size() - 2];
  rep.measured_slope = (hi.direct - lo.direct) / (hi.q - lo.q);
  rep.slope_rel_error = std::abs(rep.measured_slope / rep.expected_slope - 1.0);
  // The inner term changes sign once, at q0 = (phi(mu_hat) - sigma^2 + mu_hat^2) / (2 mu_hat);
  // both slope points must lie past it.
  const double q0 = (phi_mu - sigma2 + mu * mu) / (2.0 * mu);
  if (!(lo.q > q0)) {
    rep.message = "q grid does not reach the linear regime (q > " + detail::fmt_double(q0) + ")";
    return rep;
  }
  rep.pass = rep.max_rel_error <= 1e-9 && rep.slope_rel_error <= 0.01;
  return rep;
}

struct BernoulliReport {
  std::size_t m = 0;
  double delta = 0.0;
  double p = 0.0;
  double prob_all_ones = 0.0;      // p^m
  bool certified = false;          // p^m >= delta
  double phi_all_ones = 0.0;       // phi on the all-ones sample at Q = {1}
  double expected_error = 0.0;     // E_P[d(x,1)^2] = 1 - p
  double sigma2 = 0.0;
  bool guarantee_fails = false;    // relative guarantee impossible for every eps < 1
  std::size_t trials = 0;
  double empirical_all_ones_rate = 0.0;
  bool pass = false;
};

/// Bernoulli(p) with p in (delta^(1/m), 1): with probability >= delta all m
/// draws are 1, where phi = 0 but E = 1 - p > 0.
inline BernoulliReport counterexample_bernoulli(std::size_t m, double delta, std::size_t trials = 10000,
                                                std::uint64_t seed = 1) {
  require(m >= 1, "m must be >= 1");
  require(delta > 0.0 && delta < 1.0, "requires delta in (0,1)");
  BernoulliReport rep;
  rep.m = m;
  rep.delta = delta;
  const double floor_p = std::pow(delta, 1.0 / static_cast<double>(m));
  rep.p = 0.5 * (floor_p + 1.0);
  rep.prob_all_ones = std::pow(rep.p, static_cast<double>(m));
  rep.certified = rep.prob_all_ones >= delta && rep.p > floor_p && rep.p < 1.0;

  const auto spec = DistributionSpec::bernoulli(rep.p);
  const auto one = CenterSet::scalars({1.0});
  rep.phi_all_ones = empirical_error(Matrix::column(std::vector<double>(m, 1.0)), one);
  rep.expected_error = analytic_expected_error(spec, one);
  rep.sigma2 = analytic_profile(spec).sigma2;
  // |0 - E| <= eps/2 sigma^2 + eps/2 E with sigma^2 <= E would force 1 <= eps.
  rep.guarantee_fails = rep.phi_all_ones == 0.0 && rep.expected_error > 0.0 && rep.sigma2 <= rep.expected_error;

  rep.trials = trials;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Matrix x = sample(spec, m, derive_seed(seed, t));
    hits += std::all_of(x.data().begin(), x.data().end(), [](double v) { return v == 1.0; });
  }
  rep.empirical_all_ones_rate = trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0;
  rep.pass = rep.certified && rep.guarantee_fails;
  return rep;
}

// ---------------------------------------------------------------------------

struct PairedComparison {
  std::vector<std::size_t> m_grid;
  std::vector<double> fraction_greater;  // per m: share of replicates with a > b
  std::vector<double> mean_a, mean_b;
};

/// Compares two sweeps cell by cell; replicate r of both sweeps shares the
/// cell seed when the configs share master_seed.
inline PairedComparison compare_sweeps(const SweepResult& a, const SweepResult& b, const ExperimentConfig& cfg) {
  require(a.records.size() == b.records.size(), "sweeps must share a grid");
  PairedComparison out;
  out.m_grid = cfg.m_grid;
  const std::size_t reps = cfg.replicates;
  for (std::size_t g = 0; g < cfg.m_grid.size(); ++g) {
    std::size_t wins = 0;
    for (std::size_t r = 0; r < reps; ++r) wins += a.records[g * reps + r].delta_norm > b.records[g * reps + r].delta_norm;
    out.fraction_greater.push_back(static_cast<double>(wins) / static_cast<double>(reps));
    out.mean_a.push_back(a.mean_delta_norm[g]);
    out.mean_b.push_back(b.mean_delta_norm[g]);
  }
  return out;
}

}  // namespace kmdev
