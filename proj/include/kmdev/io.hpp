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

// Machine-readable output: per-cell CSV records and JSON summaries. Output
// carries no timestamps or host data, so identical inputs give identical
// bytes.

#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kmdev/bounds.hpp"
#include "kmdev/deviation.hpp"
#include "kmdev/moments.hpp"

namespace kmdev {

using Json = nlohmann::ordered_json;
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

inline constexpr const char* kRecordHeader = "m,replicate,delta_abs,delta_norm,argmax_kind,seed";

/// `# key=value` lines; reading them back with a config loader restores
/// the configuration.
inline void write_config_comment(std::ostream& out, std::string_view title, const ConfigEcho& echo) {
  out << "# kmdev " << title << '\n';
  for (const auto& [k, v] : echo) out << "# " << k << '=' << v << '\n';
}

inline void write_records_csv(std::ostream& out, const std::vector<DeviationRecord>& records) {
  out << kRecordHeader << '\n';
  char buf[160];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,", r.m, r.replicate, r.delta_abs, r.delta_norm);
    out << buf << kind_name(r.argmax_kind) << ',' << r.seed << '\n';
  }
}

inline Json config_json(const ConfigEcho& echo) {
  Json j = Json::object();
  for (const auto& [k, v] : echo) j[k] = v;
  return j;
}

inline Json to_json(const RateFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"stderr_slope", f.stderr_slope}, {"r2", f.r2}};
}

inline Json to_json(const BoundResult& r) {
  Json j;
  j["m_required"] = r.m_required < 9.0e15 ? Json(static_cast<std::uint64_t>(r.m_required)) : Json(r.m_required);
  j["m_real"] = r.m_real;
  j["intermediates"] = Json::object();
  for (const auto& [k, v] : r.intermediates) j["intermediates"][k] = v;
  return j;
}

inline Json to_json(const EmpiricalMoments& em) {
  Json j;
  j["n"] = em.n;
  j["mu_hat"] = em.mu_hat;
  j["sigma2_hat"] = em.sigma2_hat;
  j["m4hat_hat"] = em.m4hat_hat;
  j["mphat_hat"] = Json::object();
  for (const auto& [p, v] : em.mphat_hat) j["mphat_hat"][std::to_string(p)] = v;
  return j;
}

inline Json to_json(const MomentProfile& prof) {
  Json j;
  j["mu"] = prof.mu;
  j["sigma2"] = prof.sigma2;
  j["m4hat"] = prof.m4hat ? Json(*prof.m4hat) : Json(nullptr);
  j["mphat"] = Json::object();
  for (const auto& [p, v] : prof.mphat) j["mphat"][std::to_string(p)] = v;
  j["subgauss"] = prof.subgauss ? Json{{"a", prof.subgauss->first}, {"b", prof.subgauss->second}} : Json(nullptr);
  j["diameter"] = prof.diameter ? Json(*prof.diameter) : Json(nullptr);
  return j;
}

inline Json sweep_summary(const SweepResult& res, const ExperimentConfig& cfg, const ConfigEcho& echo) {
  Json j;
  j["config"] = config_json(echo);
  j["m_grid"] = cfg.m_grid;
  j["mean_delta_norm"] = res.mean_delta_norm;
  j["mean_delta_abs"] = res.mean_delta_abs;
  j["fit"] = cfg.m_grid.size() >= 4 ? to_json(res.fit) : Json(nullptr);
  j["replicate_fits"] = Json::array();
  for (const auto& f : res.replicate_fits) j["replicate_fits"].push_back(to_json(f));
  j["oracle"] = {{"mode", res.oracle_mode == ErrorMode::Analytic ? "analytic" : "reference"},
                 {"reference_size", res.reference_size},
                 {"relative_noise", res.oracle_relative_noise}};
  Json kinds = Json::object();
  for (const auto& r : res.records) {
    const std::string name(kind_name(r.argmax_kind));
    kinds[name] = kinds.value(name, 0) + 1;
  }
  j["argmax_kind_counts"] = kinds;
  return j;
}

}  // namespace kmdev
