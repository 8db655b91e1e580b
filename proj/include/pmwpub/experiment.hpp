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

// Experiment harness: config parsing, data preparation, seeded
// (T, epsilon, repeat) sweeps, per-run artifacts and aggregation.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pmwpub/domain.hpp"
#include "pmwpub/engine.hpp"
#include "pmwpub/ingest.hpp"
#include "pmwpub/queries.hpp"
#include "pmwpub/report.hpp"
#include "pmwpub/status.hpp"

namespace pmwpub {

enum class Algorithm { kPmwPub, kMwem };
// Whether the epsilon list holds (epsilon, delta)-DP targets or zCDP
// epsilon_tilde values.
enum class BudgetForm { kApproxDp, kZcdp };

struct QuerySpec {
  std::size_t k = 3;
  std::size_t workloads = 64;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string schema_path;
  // Either one raw file to split, or ready-made private/public files.
  std::string data_path;
  std::string private_path;
  std::string public_path;
  // "raw" files go through the schema's encoders; "index" files hold
  // category indices.
  bool index_format = false;
  SplitSpec split;
  std::optional<double> public_subsample;
  QuerySpec queries;
  std::string query_file;
  Algorithm algorithm = Algorithm::kPmwPub;
  std::vector<int> rounds = {100};
  SelectionMechanism mechanism = SelectionMechanism::kPermuteAndFlip;
  OutputMode output = OutputMode::kLastIterate;
  bool replay = true;
  BudgetForm budget_form = BudgetForm::kApproxDp;
  std::vector<double> epsilons;
  std::optional<double> delta;
  std::optional<double> probe_epsilon;
  int mixture_iterations = 100;
  int repeats = 5;
  std::uint64_t seed = 0;
  bool diagnostics = false;
  double domain_cap = 1e7;
  std::string out_dir = "out";
  // Relative paths in the config resolve against this directory.
  std::string base_dir;

  void Validate() const {
    Require(!epsilons.empty(), ErrorCode::kConfig, "epsilon list is empty");
    for (double e : epsilons) {
      Require(e > 0.0, ErrorCode::kConfig, "epsilons must be positive");
    }
    Require(repeats >= 1, ErrorCode::kConfig, "repeats must be at least 1");
    Require(!rounds.empty(), ErrorCode::kConfig, "T list is empty");
    for (int t : rounds) Require(t >= 1, ErrorCode::kConfig, "T must be >= 1");
    Require(!schema_path.empty(), ErrorCode::kConfig, "schema path missing");
    Require(!data_path.empty() ||
                (!private_path.empty() && !public_path.empty()) ||
                (algorithm == Algorithm::kMwem && !private_path.empty()),
            ErrorCode::kConfig,
            "config needs 'data' or both 'private_data' and 'public_data'");
  }

  std::string Resolve(const std::string& path) const {
    if (path.empty() || base_dir.empty()) return path;
    std::filesystem::path p(path);
    return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).string();
  }
};

namespace internal {

template <typename T>
T EnumFromString(const std::string& value,
                 const std::vector<std::pair<std::string, T>>& options,
                 const std::string& field) {
  for (const auto& [name, v] : options) {
    if (name == value) return v;
  }
  throw Error(ErrorCode::kConfig,
              "unknown value '" + value + "' for '" + field + "'");
}

}  // namespace internal

inline ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j,
                                                 std::string base_dir = "") {
  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  try {
    c.schema_path = j.at("schema").get<std::string>();
    c.data_path = j.value("data", "");
    c.private_path = j.value("private_data", "");
    c.public_path = j.value("public_data", "");
    c.index_format = j.value("data_format", "raw") == "index";
    if (j.contains("split")) {
      const auto& s = j.at("split");
      c.split.private_fraction = s.value("private_fraction", 0.9);
      c.split.public_fraction = s.value("public_fraction", 0.1);
      if (s.contains("bias_attribute")) {
        c.split.bias_attribute = s.at("bias_attribute").get<std::string>();
        c.split.bias_value = s.at("bias_value").get<std::string>();
        c.split.bias_delta = s.value("bias_delta", 0.0);
      }
      c.split.seed = s.value("seed", std::uint64_t{0});
    }
    if (j.contains("public_subsample")) {
      c.public_subsample = j.at("public_subsample").get<double>();
    }
    if (j.contains("queries")) {
      const auto& q = j.at("queries");
      c.queries.k = q.value("k", std::size_t{3});
      c.queries.workloads = q.value("workloads", std::size_t{64});
      c.queries.seed = q.value("seed", std::uint64_t{0});
    }
    c.query_file = j.value("query_file", "");
    c.algorithm = internal::EnumFromString<Algorithm>(
        j.value("algorithm", "pmwpub"),
        {{"pmwpub", Algorithm::kPmwPub}, {"mwem", Algorithm::kMwem}},
        "algorithm");
    if (j.contains("T")) {
      c.rounds = j.at("T").is_array() ? j.at("T").get<std::vector<int>>()
                                      : std::vector<int>{j.at("T").get<int>()};
    }
    c.mechanism = internal::EnumFromString<SelectionMechanism>(
        j.value("mechanism", "permute_and_flip"),
        {{"permute_and_flip", SelectionMechanism::kPermuteAndFlip},
         {"exponential", SelectionMechanism::kExponential}},
        "mechanism");
    c.output = internal::EnumFromString<OutputMode>(
        j.value("output", "last_iterate"),
        {{"last_iterate", OutputMode::kLastIterate},
         {"average", OutputMode::kAverage}},
        "output");
    c.replay = j.value("replay", true);
    c.budget_form = internal::EnumFromString<BudgetForm>(
        j.value("budget_form", "approx_dp"),
        {{"approx_dp", BudgetForm::kApproxDp}, {"zcdp", BudgetForm::kZcdp}},
        "budget_form");
    c.epsilons = j.at("epsilons").get<std::vector<double>>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("probe_epsilon")) {
      c.probe_epsilon = j.at("probe_epsilon").get<double>();
    }
    c.mixture_iterations = j.value("mixture_iterations", 100);
    c.repeats = j.value("repeats", 5);
    c.seed = j.value("seed", std::uint64_t{0});
    c.diagnostics = j.value("diagnostics", false);
    c.domain_cap = j.value("domain_cap", 1e7);
    c.out_dir = j.value("out_dir", "out");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad config: ") + e.what());
  }
  return c;
}

// Relative paths in the file, out_dir included, resolve against its directory.
inline ExperimentConfig LoadExperimentConfig(const std::string& path) {
  const std::filesystem::path p(path);
  ExperimentConfig c =
      ExperimentConfigFromJson(ReadJsonFile(path), p.parent_path().string());
  c.out_dir = c.Resolve(c.out_dir);
  return c;
}

inline nlohmann::json ExperimentConfigToJson(const ExperimentConfig& c) {
  nlohmann::json split = {{"private_fraction", c.split.private_fraction},
                          {"public_fraction", c.split.public_fraction},
                          {"seed", c.split.seed}};
  if (c.split.bias_attribute) {
    split["bias_attribute"] = *c.split.bias_attribute;
    split["bias_value"] = c.split.bias_value;
    split["bias_delta"] = c.split.bias_delta;
  }
  nlohmann::json j = {
      {"schema", c.schema_path},
      {"data", c.data_path},
      {"private_data", c.private_path},
      {"public_data", c.public_path},
      {"data_format", c.index_format ? "index" : "raw"},
      {"split", std::move(split)},
      {"queries",
       {{"k", c.queries.k},
        {"workloads", c.queries.workloads},
        {"seed", c.queries.seed}}},
      {"query_file", c.query_file},
      {"algorithm", c.algorithm == Algorithm::kPmwPub ? "pmwpub" : "mwem"},
      {"T", c.rounds},
      {"mechanism", MechanismName(c.mechanism)},
      {"output",
       c.output == OutputMode::kLastIterate ? "last_iterate" : "average"},
      {"replay", c.replay},
      {"budget_form",
       c.budget_form == BudgetForm::kApproxDp ? "approx_dp" : "zcdp"},
      {"epsilons", c.epsilons},
      {"mixture_iterations", c.mixture_iterations},
      {"repeats", c.repeats},
      {"seed", c.seed},
      {"diagnostics", c.diagnostics},
      {"domain_cap", c.domain_cap},
      {"out_dir", c.out_dir}};
  if (c.public_subsample) j["public_subsample"] = *c.public_subsample;
  if (c.delta) j["delta"] = *c.delta;
  if (c.probe_epsilon) j["probe_epsilon"] = *c.probe_epsilon;
  return j;
}

// Seed of one (T, epsilon, repeat) cell.
inline std::uint64_t DerivedSeed(std::uint64_t base, std::size_t rounds_index,
                                 std::size_t epsilon_index,
                                 std::size_t repeat_index) {
  return internal::MixSeed(
      internal::MixSeed(internal::MixSeed(base, rounds_index), epsilon_index),
      repeat_index);
}

struct PreparedData {
  SchemaPtr schema;
  Dataset private_data;
  Dataset public_data;
  QuerySet queries;
  double base_rate = 0.0;
};

inline PreparedData PrepareData(const ExperimentConfig& c) {
  PreparedData data;
  data.schema = LoadSchema(c.Resolve(c.schema_path));
  auto load = [&](const std::string& path) {
    return c.index_format ? LoadIndexCsv(c.Resolve(path), data.schema)
                          : LoadCsv(c.Resolve(path), data.schema);
  };
  if (!c.data_path.empty()) {
    SplitResult split = BiasedSplit(load(c.data_path), c.split);
    data.private_data = std::move(split.private_data);
    data.public_data = std::move(split.public_data);
    data.base_rate = split.base_rate;
  } else {
    data.private_data = load(c.private_path);
    if (!c.public_path.empty()) data.public_data = load(c.public_path);
  }
  Require(!data.private_data.empty(), ErrorCode::kIo, "private data is empty");
  if (c.public_subsample) {
    std::mt19937_64 rng(internal::MixSeed(c.seed, 0x5ab5));
    data.public_data = SubsamplePublic(data.public_data, *c.public_subsample, rng);
  }
  if (!c.query_file.empty()) {
    data.queries =
        QuerySetFromJson(ReadJsonFile(c.Resolve(c.query_file)), data.schema);
  } else {
    data.queries = QuerySet(data.schema,
                            BuildWorkloads(*data.schema, c.queries.k,
                                           c.queries.workloads, c.queries.seed));
  }
  return data;
}

struct CellResult {
  int rounds = 0;
  std::size_t rounds_index = 0;
  double epsilon = 0.0;
  std::size_t epsilon_index = 0;
  int repeat = 0;
  std::uint64_t seed = 0;
  ErrorMetrics metrics;
  std::string report_path;
};

inline RunConfig CellRunConfig(const ExperimentConfig& c, int rounds,
                               double epsilon, std::uint64_t seed) {
  RunConfig rc;
  if (c.budget_form == BudgetForm::kApproxDp) {
    rc.budget.epsilon = epsilon;
  } else {
    rc.budget.epsilon_tilde = epsilon;
  }
  rc.budget.delta = c.delta;
  rc.rounds = rounds;
  rc.mechanism = c.mechanism;
  rc.output = c.output;
  rc.replay = c.replay;
  rc.seed = seed;
  rc.diagnostics = c.diagnostics;
  rc.domain_cap = c.domain_cap;
  return rc;
}

inline std::string CellName(int rounds, std::size_t epsilon_index, int repeat) {
  return "T" + std::to_string(rounds) + "_eps" + std::to_string(epsilon_index) +
         "_rep" + std::to_string(repeat);
}

inline void WriteTextFile(const std::filesystem::path& path,
                          const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  Require(out.good(), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
}

inline RunReport ExecuteCell(const ExperimentConfig& c, const PreparedData& data,
                             const RunConfig& rc) {
  return c.algorithm == Algorithm::kPmwPub
             ? PmwPubRun(data.private_data, data.public_data, data.queries, rc)
             : MwemRun(data.private_data, data.queries, rc);
}

// One aggregate row: mean and standard error of a metric over repeats.
struct AggregateRow {
  int rounds = 0;
  double epsilon = 0.0;
  std::string metric;
  double mean = 0.0;
  double std_error = 0.0;
  int count = 0;
};

// Groups per-run (T, epsilon, metrics) records. Standard error is the sample
// standard deviation over repeats divided by sqrt(repeats); 0 for a single
// repeat.
inline std::vector<AggregateRow> AggregateReports(
    const std::vector<nlohmann::json>& reports) {
  std::map<std::pair<int, double>, std::map<std::string, std::vector<double>>>
      groups;
  for (const auto& r : reports) {
    const int rounds = r.at("run").at("T").get<int>();
    const double epsilon = r.at("run").at("epsilon").get<double>();
    auto& metrics = groups[{rounds, epsilon}];
    for (const char* m : {"max", "mean", "mse"}) {
      metrics[m].push_back(r.at("metrics").at(m).get<double>());
    }
  }
  std::vector<AggregateRow> rows;
  for (const auto& [key, metrics] : groups) {
    for (const char* name : {"max", "mean", "mse"}) {
      const std::vector<double>& v = metrics.at(name);
      const double count = static_cast<double>(v.size());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= count;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double std_error =
          v.size() > 1 ? std::sqrt(ss / (count - 1.0)) / std::sqrt(count) : 0.0;
      rows.push_back(AggregateRow{key.first, key.second, name, mean, std_error,
                                  static_cast<int>(v.size())});
    }
  }
  return rows;
}

// epsilon,metric,mean,std_error for one T.
inline std::string AggregateCsv(const std::vector<AggregateRow>& rows,
                                int rounds) {
  std::ostringstream out;
  out << "epsilon,metric,mean,std_error\n";
  for (const AggregateRow& r : rows) {
    if (r.rounds != rounds) continue;
    out << nlohmann::json(r.epsilon).dump() << ',' << r.metric << ','
        << nlohmann::json(r.mean).dump() << ','
        << nlohmann::json(r.std_error).dump() << '\n';
  }
  return out.str();
}

inline std::vector<nlohmann::json> LoadRunReports(
    const std::filesystem::path& runs_dir) {
  std::vector<std::filesystem::path> files;
  Require(std::filesystem::is_directory(runs_dir), ErrorCode::kIo,
          "'" + runs_dir.string() + "' is not a directory");
  for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<nlohmann::json> reports;
  for (const auto& f : files) reports.push_back(ReadJsonFile(f.string()));
  return reports;
}

// Writes one aggregate file per T: aggregate.csv for a single T, else
// aggregate_T<T>.csv. Returns the paths written.
inline std::vector<std::string> WriteAggregates(
    const std::vector<nlohmann::json>& reports,
    const std::filesystem::path& out_dir) {
  const std::vector<AggregateRow> rows = AggregateReports(reports);
  std::vector<int> rounds;
  for (const AggregateRow& r : rows) {
    if (std::find(rounds.begin(), rounds.end(), r.rounds) == rounds.end()) {
      rounds.push_back(r.rounds);
    }
  }
  std::vector<std::string> paths;
  for (int t : rounds) {
    const std::filesystem::path path =
        out_dir / (rounds.size() == 1 ? std::string("aggregate.csv")
                                      : "aggregate_T" + std::to_string(t) +
                                            ".csv");
    WriteTextFile(path, AggregateCsv(rows, t));
    paths.push_back(path.string());
  }
  return paths;
}

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<std::string> aggregate_paths;
};

// Runs every (T, epsilon, repeat) cell, `jobs` at a time. Output files are
// independent of `jobs`.
inline ExperimentResult RunExperiment(const ExperimentConfig& c, int jobs = 1) {
  c.Validate();
  const PreparedData data = PrepareData(c);
  const std::filesystem::path out_dir(c.out_dir);
  const std::filesystem::path runs_dir = out_dir / "runs";
  std::filesystem::create_directories(runs_dir);
  const nlohmann::json config_json = ExperimentConfigToJson(c);
  WriteTextFile(out_dir / "config.resolved.json",
                nlohmann::json{{"version", kVersion}, {"config", config_json}}
                        .dump(2) +
                    "\n");
  WriteTextFile(out_dir / "queries.json",
                QuerySetToJson(data.queries).dump() + "\n");

  std::vector<CellResult> cells;
  for (std::size_t ti = 0; ti < c.rounds.size(); ++ti) {
    for (std::size_t ei = 0; ei < c.epsilons.size(); ++ei) {
      for (int rep = 0; rep < c.repeats; ++rep) {
        CellResult cell;
        cell.rounds = c.rounds[ti];
        cell.rounds_index = ti;
        cell.epsilon = c.epsilons[ei];
        cell.epsilon_index = ei;
        cell.repeat = rep;
        cell.seed = DerivedSeed(c.seed, ti, ei, static_cast<std::size_t>(rep));
        cells.push_back(cell);
      }
    }
  }

  std::vector<nlohmann::json> reports(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        CellResult& cell = cells[i];
        const RunConfig rc =
            CellRunConfig(c, cell.rounds, cell.epsilon, cell.seed);
        const RunReport report = ExecuteCell(c, data, rc);
        cell.metrics = report.metrics;
        nlohmann::json j = RunReportToJson(report, data.queries);
        j["config"] = config_json;
        j["run"] = {{"T", cell.rounds},
                    {"epsilon", cell.epsilon},
                    {"epsilon_index", cell.epsilon_index},
                    {"repeat", cell.repeat},
                    {"seed", cell.seed},
                    {"n_private", data.private_data.size()},
                    {"n_public", data.public_data.size()}};
        const std::string name =
            CellName(cell.rounds, cell.epsilon_index, cell.repeat);
        cell.report_path = (runs_dir / (name + ".json")).string();
        WriteTextFile(cell.report_path, j.dump(1) + "\n");
        std::ostringstream trace;
        WriteTraceCsv(trace, report.trace);
        WriteTextFile(out_dir / "runs" / (name + ".trace.csv"), trace.str());
        reports[i] = std::move(j);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = cells.size();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, cells.size()));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  ExperimentResult result;
  result.cells = std::move(cells);
  result.aggregate_paths = WriteAggregates(reports, out_dir);
  return result;
}

struct MixtureErrorResult {
  MixtureErrorReport report;
  std::optional<PrivacyLedger> ledger;
  std::size_t n_private = 0;
  std::size_t support_size = 0;
};

inline MixtureErrorResult RunMixtureError(const ExperimentConfig& c) {
  const PreparedData data = PrepareData(c);
  Require(!data.public_data.empty(), ErrorCode::kConfig,
          "mixture error needs public data");
  const Support support = Support::FromDataset(data.public_data);
  MixtureErrorResult result;
  result.n_private = data.private_data.size();
  result.support_size = support.size();
  result.report = BestMixtureError(data.private_data, support, data.queries,
                                   c.mixture_iterations);
  if (c.probe_epsilon) {
    result.ledger = PrivacyLedger::ProbeOnly(*c.probe_epsilon);
    std::mt19937_64 rng(internal::MixSeed(c.seed, 0x9a0be));
    ReleaseMixtureError(result.report, result.n_private, *c.probe_epsilon, rng,
                        *result.ledger);
  }
  return result;
}

inline nlohmann::json MixtureErrorToJson(const MixtureErrorResult& r) {
  nlohmann::json j = {{"version", kVersion},
                      {kTimestampField, UtcTimestamp()},
                      {"estimate_nonprivate", r.report.estimate},
                      {"iterations", r.report.iterations},
                      {"best_iteration", r.report.best_iteration},
                      {"n_private", r.n_private},
                      {"support_size", r.support_size}};
  if (r.report.released) j["released"] = *r.report.released;
  if (r.ledger) j["budget"] = LedgerToJson(*r.ledger);
  return j;
}

// Samples `rows` records from the distribution in a run report.
inline Dataset SynthesizeFromReport(const nlohmann::json& report,
                                    std::size_t rows, std::uint64_t seed) {
  Require(report.contains("distribution") && report.contains("schema"),
          ErrorCode::kConfig, "run report has no distribution");
  auto schema = std::make_shared<const Schema>(SchemaFromJson(report.at("schema")));
  const Distribution dist = DistributionFromJson(report.at("distribution"), schema);
  std::mt19937_64 rng(seed);
  return SynthesizeDataset(dist, rows, rng);
}

}  // namespace pmwpub
