//
// Copyright 2026 The pmwpub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// JSON and CSV forms of query sets, budgets and run reports.

#pragma once

#include <chrono>
#include <ctime>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pmwpub/accounting.hpp"
#include "pmwpub/engine.hpp"
#include "pmwpub/ingest.hpp"
#include "pmwpub/queries.hpp"

#ifndef PMWPUB_VERSION
#define PMWPUB_VERSION "unknown"
#endif

namespace pmwpub {

inline constexpr const char* kVersion = PMWPUB_VERSION;
// Report fields excluded from reproducibility comparisons.
inline constexpr const char* kTimestampField = "generated_at";

inline std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

// {"k": k, "workloads": [[attribute indices]]}; k is 0 for mixed sizes.
inline nlohmann::json QuerySetToJson(const QuerySet& qs) {
  nlohmann::json workloads = nlohmann::json::array();
  std::size_t k = qs.num_workloads() == 0 ? 0 : qs.workload(0).attributes.size();
  for (const Workload& w : qs.workloads()) {
    workloads.push_back(w.attributes);
    if (w.attributes.size() != k) k = 0;
  }
  return nlohmann::json{{"k", k}, {"workloads", std::move(workloads)}};
}

inline QuerySet QuerySetFromJson(const nlohmann::json& j, SchemaPtr schema) {
  try {
    std::vector<Workload> workloads;
    for (const auto& w : j.at("workloads")) {
      workloads.push_back(Workload{w.get<std::vector<std::size_t>>()});
    }
    return QuerySet(std::move(schema), std::move(workloads));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig,
                std::string("bad query set JSON: ") + e.what());
  }
}

inline nlohmann::json LedgerToJson(const PrivacyLedger& ledger) {
  const PrivacyBudget& b = ledger.budget();
  nlohmann::json releases = nlohmann::json::array();
  for (const Release& r : ledger.releases()) {
    nlohmann::json j = {{"mechanism", r.mechanism},
                        {"round", r.round},
                        {"epsilon", r.epsilon},
                        {"rho", r.rho}};
    if (r.share.numerator() != 0) {
      j["share"] = std::to_string(r.share.numerator()) + "/" +
                   std::to_string(r.share.denominator());
    }
    releases.push_back(std::move(j));
  }
  const Fraction& spent = ledger.run_share_spent();
  return nlohmann::json{
      {"epsilon_tilde", b.epsilon_tilde},
      {"T", b.rounds},
      {"epsilon0", b.epsilon0},
      {"delta", b.delta},
      {"epsilon_reported", ledger.EpsilonReported()},
      {"rho_capacity", ledger.rho_capacity()},
      {"rho_spent", ledger.rho_spent()},
      {"run_share_spent", std::to_string(spent.numerator()) + "/" +
                              std::to_string(spent.denominator())},
      {"probe_epsilon", ledger.probe_allowance()},
      {"releases", std::move(releases)}};
}

inline nlohmann::json MetricsToJson(const ErrorMetrics& m) {
  return nlohmann::json{{"max", m.max},
                        {"mean", m.mean},
                        {"mse", m.mse},
                        {"worst_query", m.worst_index}};
}

inline nlohmann::json DistributionToJson(const Distribution& d) {
  const Support& support = *d.support();
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < support.size(); ++i) {
    RecordView p = support.point(i);
    points.push_back(std::vector<CategoryIndex>(p.begin(), p.end()));
  }
  return nlohmann::json{{"points", std::move(points)},
                        {"log_weights", d.log_weights()}};
}

inline Distribution DistributionFromJson(const nlohmann::json& j,
                                         const SchemaPtr& schema) {
  try {
    Dataset points(schema);
    for (const auto& p : j.at("points")) {
      points.Append(p.get<std::vector<CategoryIndex>>());
    }
    std::vector<double> log_weights =
        j.at("log_weights").get<std::vector<double>>();
    auto support =
        std::make_shared<const Support>(Support::FromDataset(points));
    Require(support->size() == points.size(), ErrorCode::kConfig,
            "distribution points are not distinct");
    return Distribution(std::move(support), std::move(log_weights));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig,
                std::string("bad distribution JSON: ") + e.what());
  }
}

inline nlohmann::json TraceToJson(const std::vector<TraceRow>& trace) {
  nlohmann::json rows = nlohmann::json::array();
  for (const TraceRow& r : trace) {
    nlohmann::json j = {{"iteration", r.iteration},
                        {"query", r.query},
                        {"noisy_gap", r.noisy_gap},
                        {"measured", r.measured},
                        {"replayed", r.replayed}};
    if (r.max_error) j["max_error_nonprivate"] = *r.max_error;
    rows.push_back(std::move(j));
  }
  return rows;
}

// iteration,query,noisy_gap,measured,replayed,max_error_nonprivate
inline void WriteTraceCsv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iteration,query,noisy_gap,measured,replayed,max_error_nonprivate\n";
  for (const TraceRow& r : trace) {
    out << r.iteration << ',' << r.query << ','
        << nlohmann::json(r.noisy_gap).dump() << ','
        << nlohmann::json(r.measured).dump() << ',' << r.replayed << ',';
    if (r.max_error) out << nlohmann::json(*r.max_error).dump();
    out << '\n';
  }
}

inline nlohmann::json RunReportToJson(const RunReport& report,
                                      const QuerySet& queries) {
  return nlohmann::json{
      {"version", kVersion},
      {kTimestampField, UtcTimestamp()},
      {"algorithm", report.algorithm},
      {"private", report.private_run},
      {"metrics", MetricsToJson(report.metrics)},
      {"budget", LedgerToJson(report.ledger)},
      {"schema", SchemaToJson(*queries.schema())},
      {"queries", QuerySetToJson(queries)},
      {"distribution", DistributionToJson(report.distribution)},
      {"trace", TraceToJson(report.trace)}};
}

// Copy of a report with timestamp fields removed.
inline nlohmann::json WithoutTimestamps(nlohmann::json j) {
  if (j.is_object()) {
    j.erase(kTimestampField);
    for (auto& [key, value] : j.items()) value = WithoutTimestamps(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = WithoutTimestamps(value);
  }
  return j;
}

}  // namespace pmwpub
