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

// Command-line experiment harness.
//
//   pmwpub run --config exp.json [--seed S] [--out-dir DIR] [--jobs N]
//   pmwpub mixture-error --config exp.json [--probe-epsilon E]
//   pmwpub synthesize --report run.json --rows N --out synthetic.csv
//   pmwpub aggregate --runs-dir DIR/runs --out-dir DIR
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 budget error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pmwpub/pmwpub.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int jobs = 1;
  std::optional<double> probe_epsilon;
  std::optional<int> iterations;
  std::string report_path;
  std::size_t rows = 0;
  std::string out_path;
  std::string runs_dir;
};

pmwpub::ExperimentConfig LoadConfig(const Options& o) {
  pmwpub::ExperimentConfig c = pmwpub::LoadExperimentConfig(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.probe_epsilon) c.probe_epsilon = *o.probe_epsilon;
  if (o.iterations) c.mixture_iterations = *o.iterations;
  return c;
}

int CmdRun(const Options& o) {
  const pmwpub::ExperimentConfig c = LoadConfig(o);
  const pmwpub::ExperimentResult result = pmwpub::RunExperiment(c, o.jobs);
  for (const auto& cell : result.cells) {
    std::cout << "T=" << cell.rounds << " epsilon=" << cell.epsilon
              << " repeat=" << cell.repeat << " max_error=" << cell.metrics.max
              << " mean_error=" << cell.metrics.mean << '\n';
  }
  for (const auto& path : result.aggregate_paths) {
    std::cout << "wrote " << path << '\n';
  }
  return 0;
}

int CmdMixtureError(const Options& o) {
  const pmwpub::ExperimentConfig c = LoadConfig(o);
  const pmwpub::MixtureErrorResult r = pmwpub::RunMixtureError(c);
  std::cout << "best mixture error (non-private estimate): "
            << r.report.estimate << " after " << r.report.iterations
            << " iterations over " << r.support_size << " support points\n";
  if (r.report.released) {
    std::cout << "privately released: " << *r.report.released << '\n';
    std::cout << "ledger: probe epsilon " << r.ledger->probe_allowance()
              << " adds rho " << r.ledger->rho_spent() << '\n';
  }
  const nlohmann::json j = pmwpub::MixtureErrorToJson(r);
  std::cout << j.dump() << '\n';
  std::filesystem::create_directories(c.out_dir);
  pmwpub::WriteTextFile(std::filesystem::path(c.out_dir) / "mixture_error.json",
                        j.dump(2) + "\n");
  return 0;
}

int CmdSynthesize(const Options& o) {
  const nlohmann::json report = pmwpub::ReadJsonFile(o.report_path);
  const pmwpub::Dataset synthetic =
      pmwpub::SynthesizeFromReport(report, o.rows, o.seed.value_or(0));
  pmwpub::SaveIndexCsv(o.out_path, synthetic);
  std::cout << "wrote " << synthetic.size() << " rows to " << o.out_path
            << '\n';
  return 0;
}

int CmdAggregate(const Options& o) {
  const auto reports = pmwpub::LoadRunReports(o.runs_dir);
  pmwpub::Require(!reports.empty(), pmwpub::ErrorCode::kIo,
                  "no run reports in '" + o.runs_dir + "'");
  const std::string out_dir = o.out_dir.value_or(".");
  std::filesystem::create_directories(out_dir);
  for (const auto& path : pmwpub::WriteAggregates(reports, out_dir)) {
    std::cout << "wrote " << path << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private query release with public data"};
  app.set_version_flag("--version", std::string(pmwpub::kVersion));
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "Experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Base seed (overrides the config)");
    cmd->add_option("--out-dir", o.out_dir, "Output directory");
  };

  CLI::App* run = app.add_subcommand("run", "Run an experiment sweep");
  add_common(run);
  run->add_option("--jobs", o.jobs, "Cells to run in parallel")
      ->check(CLI::PositiveNumber);

  CLI::App* mixture = app.add_subcommand(
      "mixture-error", "Estimate (and optionally release) the best mixture error");
  add_common(mixture);
  mixture->add_option("--probe-epsilon", o.probe_epsilon,
                      "Release the estimate with this pure-DP epsilon");
  mixture->add_option("--iterations", o.iterations,
                      "Multiplicative-weights iterations");

  CLI::App* synth =
      app.add_subcommand("synthesize", "Sample synthetic rows from a run report");
  synth->add_option("--report", o.report_path, "Run report JSON")
      ->required()
      ->check(CLI::ExistingFile);
  synth->add_option("--rows", o.rows, "Number of rows")
      ->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--out", o.out_path, "Output CSV")->required();
  synth->add_option("--seed", o.seed, "Sampling seed");

  CLI::App* aggregate = app.add_subcommand(
      "aggregate", "Rebuild aggregate CSVs from per-run reports");
  aggregate->add_option("--runs-dir", o.runs_dir, "Directory of run reports")
      ->required();
  aggregate->add_option("--out-dir", o.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run->parsed()) return CmdRun(o);
    if (mixture->parsed()) return CmdMixtureError(o);
    if (synth->parsed()) return CmdSynthesize(o);
    if (aggregate->parsed()) return CmdAggregate(o);
  } catch (const pmwpub::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pmwpub::ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
