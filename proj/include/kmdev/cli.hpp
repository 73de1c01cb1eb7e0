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

// Command-line front end. Exit codes: 0 success, 1 usage error,
// 2 violated precondition, 3 internal invariant failure or failed check.

#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11/CLI11.hpp>

#include "kmdev/bounds.hpp"
#include "kmdev/checks.hpp"
#include "kmdev/deviation.hpp"
#include "kmdev/distributions.hpp"
#include "kmdev/io.hpp"
#include "kmdev/moments.hpp"

namespace kmdev::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kPrecondition = 2, kInvariant = 3 };

namespace detail {

using kmdev::detail::fmt_double;
using kmdev::detail::split;
using kmdev::detail::trim;

inline std::uint64_t to_uint(std::string_view s, std::string_view what) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw UsageError("invalid value for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

inline bool to_bool(std::string_view s, std::string_view what) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw UsageError("invalid boolean for " + std::string(what) + ": '" + std::string(s) + "'");
}

/// "128,256,512" or "128:16384" (powers of two between the endpoints).
inline std::vector<std::size_t> parse_grid(std::string_view s) {
  std::vector<std::size_t> grid;
  if (const auto colon = s.find(':'); colon != std::string_view::npos) {
    const std::size_t lo = to_uint(s.substr(0, colon), "m-grid"), hi = to_uint(s.substr(colon + 1), "m-grid");
    if (lo == 0 || hi < lo) throw UsageError("m-grid range must satisfy 0 < lo <= hi");
    for (std::size_t m = lo; m <= hi; m *= 2) grid.push_back(m);
    return grid;
  }
  for (auto item : split(s, ',')) grid.push_back(to_uint(item, "m-grid"));
  return grid;
}

inline std::string grid_string(const std::vector<std::size_t>& grid) {
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) out += (i ? "," : "") + std::to_string(grid[i]);
  return out;
}

inline std::vector<int> parse_ps(std::string_view s) {
  std::vector<int> ps;
  for (auto item : split(s, ',')) {
    const auto v = to_uint(item, "ps");
    if (v < 1 || v > 64) throw UsageError("moment orders must lie in 1..64");
    ps.push_back(static_cast<int>(v));
  }
  return ps;
}

/// Flat key=value file; a leading '#' is stripped and lines without '='
/// are ignored, so the header of any CSV this tool writes is a valid config.
/// A file starting with '{' is read as JSON and its "config" object is used.
inline std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::map<std::string, std::string> kv;
  if (const auto first = text.find_first_not_of(" \t\r\n"); first != std::string::npos && text[first] == '{') {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::exception& e) {
      throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) throw UsageError("JSON config lacks a \"config\" object");
    for (const auto& [k, v] : j["config"].items()) kv[k] = v.is_string() ? v.get<std::string>() : v.dump();
    return kv;
  }
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    std::string_view s = trim(line);
    if (!s.empty() && s.front() == '#') s = trim(s.substr(1));
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) continue;
    kv[std::string(trim(s.substr(0, eq)))] = std::string(trim(s.substr(eq + 1)));
  }
  return kv;
}

/// Options shared by deviate, rate and counterexample. Values are kept as
/// text until a config file and the command line have been merged.
struct SweepOptions {
  std::map<std::string, std::string> flags;  // key -> value given on the command line
  std::string config_path;
  bool no_restrict = false;

  static constexpr const char* kKeys[] = {"dist",      "k",       "m-grid",      "replicates", "seed",
                                          "candidates", "reference-size", "restrict", "lloyd-iters", "threads"};

  void attach(CLI::App& sub) {
    for (const char* key : kKeys) {
      if (std::string_view(key) == "restrict") continue;
      sub.add_option_function<std::string>(std::string("--") + key,
                                           [this, key](const std::string& v) { flags[key] = v; });
    }
    sub.add_flag("--no-restrict", no_restrict, "Measure over every candidate, not only those with f_Q <= 1");
    sub.add_option("--config", config_path, "Flat key=value file (or JSON with a config object)");
  }

  ExperimentConfig resolve() const {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = read_config(config_path);
    for (const auto& [k, v] : flags) kv[k] = v;
    if (no_restrict) kv["restrict"] = "false";
    ExperimentConfig cfg;
    for (const auto& [k, v] : kv) {
      if (k == "dist") cfg.spec = parse_distribution(v);
      else if (k == "k") cfg.k = to_uint(v, k);
      else if (k == "m-grid") cfg.m_grid = parse_grid(v);
      else if (k == "replicates") cfg.replicates = to_uint(v, k);
      else if (k == "seed") cfg.master_seed = to_uint(v, k);
      else if (k == "candidates") cfg.candidates_per_cell = to_uint(v, k);
      else if (k == "reference-size") cfg.reference_size = to_uint(v, k);
      else if (k == "restrict") cfg.restrict_to_unit = to_bool(v, k);
      else if (k == "lloyd-iters") cfg.lloyd_iters = to_uint(v, k);
      else if (k == "threads") cfg.threads = to_uint(v, k);
      else throw UsageError("unknown config key '" + k + "'");
    }
    if (cfg.threads == 0) throw UsageError("threads must be >= 1");
    return cfg;
  }
};

/// Every key that affects results, with defaults filled in. threads is
/// echoed for the record although results do not depend on it.
inline ConfigEcho echo(const ExperimentConfig& cfg) {
  return {{"dist", to_string(cfg.spec)},
          {"k", std::to_string(cfg.k)},
          {"m-grid", grid_string(cfg.m_grid)},
          {"replicates", std::to_string(cfg.replicates)},
          {"seed", std::to_string(cfg.master_seed)},
          {"candidates", std::to_string(cfg.candidates_per_cell)},
          {"reference-size", std::to_string(cfg.resolved_reference_size())},
          {"restrict", cfg.restrict_to_unit ? "true" : "false"},
          {"lloyd-iters", std::to_string(cfg.lloyd_iters)},
          {"threads", std::to_string(cfg.threads)}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
}

inline void print_json(std::ostream& out, const Json& j) { out << j.dump(2) << '\n'; }

struct BoundOptions {
  std::string tier;
  double epsilon = 0.0, delta = 0.0;
  std::uint64_t k = 1, d = 1;
  std::optional<double> m4hat, mphat, a, b, R, sigma2, t, pdim;
  int p = 8;
  std::string dist;
};

inline int run_bound(const BoundOptions& o, std::ostream& out) {
  static const std::map<std::string, Tier> tiers = {{"kurtosis", Tier::Kurtosis},
                                                    {"moment", Tier::Moment},
                                                    {"subgaussian", Tier::Subgaussian},
                                                    {"bounded", Tier::BoundedSupport},
                                                    {"framework", Tier::Framework}};
  BoundQuery q;
  q.tier = tiers.at(o.tier);
  q.epsilon = o.epsilon;
  q.delta = o.delta;
  q.k = o.k;
  q.d = o.d;
  q.p = o.p;
  require(q.k >= 1 && q.d >= 1, "requires k >= 1 and d >= 1");
  if (!o.dist.empty()) q.profile = analytic_profile(parse_distribution(o.dist));
  if (o.m4hat) q.profile.m4hat = *o.m4hat;
  if (o.mphat) q.profile.mphat[o.p] = *o.mphat;
  if (o.a || o.b) {
    if (!(o.a && o.b)) throw UsageError("--a and --b must be given together");
    q.profile.subgauss = std::pair{*o.a, *o.b};
  }
  if (o.R) q.profile.diameter = *o.R;
  if (o.sigma2) q.profile.sigma2 = *o.sigma2;
  if (q.tier == Tier::BoundedSupport && !o.sigma2 && o.dist.empty())
    throw PreconditionError("assumption unavailable: bounded tier requires sigma^2 (--sigma2)");
  q.t = o.t;
  q.pdim = o.pdim ? o.pdim : std::optional<double>(pdim_bound(q.k, q.d));

  const auto res = sample_size(q);
  Json j;
  Json cfg;
  cfg["tier"] = o.tier;
  cfg["epsilon"] = q.epsilon;
  cfg["delta"] = q.delta;
  cfg["k"] = q.k;
  cfg["d"] = q.d;
  if (!o.dist.empty()) cfg["dist"] = o.dist;
  switch (q.tier) {
    case Tier::Kurtosis: cfg["m4hat"] = *q.profile.m4hat; break;
    case Tier::Moment: cfg["p"] = q.p; cfg["mphat"] = q.profile.mphat.at(q.p); break;
    case Tier::Subgaussian: cfg["a"] = q.profile.subgauss->first; cfg["b"] = q.profile.subgauss->second; break;
    case Tier::BoundedSupport: cfg["R"] = *q.profile.diameter; cfg["sigma2"] = q.profile.sigma2; break;
    case Tier::Framework: cfg["t"] = *q.t; cfg["pdim"] = *q.pdim; break;
  }
  j["config"] = cfg;
  const Json body = to_json(res);
  for (const auto& [k, v] : body.items()) j[k] = v;
  print_json(out, j);
  return kOk;
}

inline int run_moments(const std::string& input, const std::string& ps_text, std::ostream& out) {
  const Matrix x = load_csv(input);
  const auto ps = parse_ps(ps_text);
  const auto em = estimate_moments(x, ps);
  const auto [lhs, rhs] = moors_identity_check(x);
  Json j;
  j["config"] = {{"input", input}, {"ps", ps_text}};
  j["moments"] = to_json(em);
  j["moors"] = {{"m4hat", lhs}, {"shifted_variance", rhs}};
  j["envelope_second_moment"] = empirical_envelope_second_moment(x, em.mu_hat, em.sigma2_hat);
  print_json(out, j);
  return kOk;
}

inline int run_sweep_command(bool rate, const SweepOptions& so, const std::string& output, const std::string& summary,
                             std::ostream& out) {
  const auto cfg = so.resolve();
  const auto res = rate ? rate_sweep(cfg) : run_sweep(cfg);
  const auto e = echo(cfg);
  std::ostringstream csv;
  write_config_comment(csv, rate ? "rate" : "deviate", e);
  write_records_csv(csv, res.records);
  const Json j = sweep_summary(res, cfg, e);
  if (rate) {
    if (!output.empty()) write_text(output, csv.str());
    print_json(out, j);
  } else {
    if (output.empty()) out << csv.str();
    else write_text(output, csv.str());
  }
  if (!summary.empty()) write_text(summary, j.dump(2) + "\n");
  return kOk;
}

struct CounterexampleOptions {
  std::string which;
  double lambda = 1000.0;
  double epsilon = 0.1;
  std::optional<std::uint64_t> m;
  double delta = 0.5;
  std::string q_grid = "10,100,1000,10000";
  std::uint64_t trials = 10000;
};

inline int run_counterexample(const CounterexampleOptions& o, const SweepOptions& so, std::ostream& out) {
  Json j;
  bool pass = false;
  if (o.which == "scaling") {
    auto cfg = so.resolve();
    if (o.m) cfg.m_grid = {static_cast<std::size_t>(*o.m)};
    cfg.validate();
    const auto r = counterexample_scaling(o.lambda, cfg, o.epsilon);
    auto e = echo(cfg);
    e.insert(e.begin(), {{"which", "scaling"}, {"lambda", fmt_double(o.lambda)}, {"epsilon", fmt_double(o.epsilon)}});
    j["config"] = config_json(e);
    j["report"] = {{"lambda", r.lambda}, {"m", r.m}, {"epsilon", r.epsilon},
                   {"base_deviation", r.base_deviation}, {"scaled_deviation", r.scaled_deviation},
                   {"ratio", r.ratio}, {"expected_ratio", r.expected_ratio}, {"rel_error", r.rel_error},
                   {"lambda_threshold", r.lambda_threshold}, {"exceeds_epsilon", r.exceeds_epsilon}, {"pass", r.pass}};
    pass = r.pass;
  } else if (o.which == "divergence") {
    auto cfg = so.resolve();
    const std::size_t m = o.m.value_or(1000);
    const auto prof = analytic_profile(cfg.spec);
    const auto x = sample(cfg.spec, m, cfg.master_seed);
    const auto grid = kmdev::detail::to_vector(o.q_grid, ',', "q-grid");
    const auto r = counterexample_divergence(x, grid, prof.sigma2);
    j["config"] = {{"which", "divergence"}, {"dist", to_string(cfg.spec)}, {"m", m},
                   {"seed", std::to_string(cfg.master_seed)}, {"q-grid", o.q_grid}};
    Json pts = Json::array();
    for (const auto& p : r.points)
      pts.push_back({{"q", p.q}, {"direct", p.direct}, {"identity", p.identity}, {"rel_error", p.rel_error}});
    j["report"] = {{"mu_hat", r.mu_hat}, {"sigma2", r.sigma2}, {"points", pts},
                   {"max_rel_error", r.max_rel_error}, {"measured_slope", r.measured_slope},
                   {"expected_slope", r.expected_slope}, {"slope_rel_error", r.slope_rel_error},
                   {"degenerate", r.degenerate}, {"message", r.message}, {"pass", r.pass}};
    pass = r.pass;
  } else {
    auto cfg = so.resolve();
    const std::size_t m = o.m.value_or(100);
    const auto r = counterexample_bernoulli(m, o.delta, o.trials, cfg.master_seed);
    j["config"] = {{"which", "bernoulli"}, {"m", m}, {"delta", o.delta}, {"trials", o.trials},
                   {"seed", std::to_string(cfg.master_seed)}};
    j["report"] = {{"m", r.m}, {"delta", r.delta}, {"p", r.p}, {"prob_all_ones", r.prob_all_ones},
                   {"certified", r.certified}, {"phi_all_ones", r.phi_all_ones},
                   {"expected_error", r.expected_error}, {"sigma2", r.sigma2},
                   {"guarantee_fails", r.guarantee_fails}, {"trials", r.trials},
                   {"empirical_all_ones_rate", r.empirical_all_ones_rate}, {"pass", r.pass}};
    pass = r.pass;
  }
  print_json(out, j);
  return pass ? kOk : kInvariant;
}

inline int run_verify(std::uint64_t seed, std::ostream& out) {
  bool all = true;
  out << "# kmdev verify\n# seed=" << seed << '\n';
  for (const auto& c : run_verify_suite(seed)) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    all = all && c.pass;
  }
  return all ? kOk : kInvariant;
}

}  // namespace detail

/// Parses argv and runs one subcommand, writing results to out and
/// diagnostics to err. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Uniform deviation bounds and experiments for k-means quantization error", "kmdev"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  detail::BoundOptions bo;
  auto* bound = app.add_subcommand("bound", "Sample size needed for an (eps, delta) uniform deviation guarantee");
  bound->add_option("--tier", bo.tier)
      ->required()
      ->check(CLI::IsMember({"kurtosis", "moment", "subgaussian", "bounded", "framework"}));
  bound->add_option("--epsilon", bo.epsilon)->required();
  bound->add_option("--delta", bo.delta)->required();
  bound->add_option("--k", bo.k)->capture_default_str();
  bound->add_option("--d", bo.d)->capture_default_str();
  bound->add_option("--m4hat", bo.m4hat, "Kurtosis M4");
  bound->add_option("--p", bo.p, "Moment order for the moment tier")->capture_default_str();
  bound->add_option("--mphat", bo.mphat, "Moment M_p for the moment tier");
  bound->add_option("--a", bo.a, "Subgaussian tail constant a");
  bound->add_option("--b", bo.b, "Subgaussian tail constant b");
  bound->add_option("--R", bo.R, "Support diameter");
  bound->add_option("--sigma2", bo.sigma2, "Variance");
  bound->add_option("--t", bo.t, "Framework threshold t");
  bound->add_option("--pdim", bo.pdim, "Pseudo-dimension (default: bound for k, d)");
  bound->add_option("--dist", bo.dist, "Take the moment profile from a distribution spec");

  std::string input, ps = "4";
  auto* moments = app.add_subcommand("moments", "Moment estimates for a CSV sample");
  moments->add_option("--input", input)->required();
  moments->add_option("--ps", ps, "Comma-separated moment orders")->capture_default_str();

  detail::SweepOptions dso, rso, cso;
  std::string d_output, d_summary, r_output, r_summary;
  auto* deviate = app.add_subcommand("deviate", "Per-cell deviation records as CSV");
  dso.attach(*deviate);
  deviate->add_option("--output", d_output, "CSV path (default: standard output)");
  deviate->add_option("--summary", d_summary, "JSON summary path");
  auto* rate = app.add_subcommand("rate", "Deviation sweep with a log-log rate fit, as JSON");
  rso.attach(*rate);
  rate->add_option("--output", r_output, "CSV path for the per-cell records");
  rate->add_option("--summary", r_summary, "Copy of the JSON summary");

  detail::CounterexampleOptions co;
  auto* counter = app.add_subcommand("counterexample", "Reproduce the impossibility constructions");
  counter->add_option("--which", co.which)->required()->check(CLI::IsMember({"scaling", "divergence", "bernoulli"}));
  counter->add_option("--lambda", co.lambda)->capture_default_str();
  counter->add_option("--epsilon", co.epsilon)->capture_default_str();
  counter->add_option("--m", co.m, "Sample size");
  counter->add_option("--q-grid", co.q_grid)->capture_default_str();
  counter->add_option("--delta", co.delta)->capture_default_str();
  counter->add_option("--trials", co.trials)->capture_default_str();
  cso.attach(*counter);

  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "Run the identity and inequality self-checks");
  verify->add_option("--seed", verify_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*bound) return detail::run_bound(bo, out);
    if (*moments) return detail::run_moments(input, ps, out);
    if (*deviate) return detail::run_sweep_command(false, dso, d_output, d_summary, out);
    if (*rate) return detail::run_sweep_command(true, rso, r_output, r_summary, out);
    if (*counter) return detail::run_counterexample(co, cso, out);
    if (*verify) return detail::run_verify(verify_seed, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const PreconditionError& e) {
    err << "precondition violated: " << e.what() << '\n';
    return kPrecondition;
  } catch (const InvariantError& e) {
    err << "invariant failure: " << e.what() << '\n';
    return kInvariant;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariant;
  }
  return kUsage;
}

/// Convenience overload; args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"kmdev"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace kmdev::cli
