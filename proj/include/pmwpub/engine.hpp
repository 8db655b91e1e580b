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

// Private multiplicative weights over a fixed support.
//
// PmwPubRun reweights the support of a public dataset, starting from the
// public empirical distribution; MwemRun does the same over the enumerated
// full domain starting from uniform. Each of the T iterations
//
//   1. selects a query whose error |q(A) - q(D)| is large (permute-and-flip
//      or exponential mechanism, epsilon0 each),
//   2. measures it with Gaussian noise (epsilon0^2 / 2 zCDP), clipped to
//      [0, 1],
//   3. applies A(x) <- A(x) exp(q(x) (a - q(A)) / 2) and renormalizes,
//      optionally replaying earlier measurements that still look stale.
//
// With epsilon0 = epsilon_tilde / sqrt(2T) the run is epsilon_tilde^2 / 2
// zCDP in total.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmwpub/accounting.hpp"
#include "pmwpub/domain.hpp"
#include "pmwpub/mechanisms.hpp"
#include "pmwpub/queries.hpp"
#include "pmwpub/status.hpp"

namespace pmwpub {

enum class SelectionMechanism { kPermuteAndFlip, kExponential };
enum class OutputMode { kLastIterate, kAverage };
// kNoiselessForTesting selects by argmax and measures exactly. Such runs
// spend no budget and their reports are marked non-private.
enum class NoiseMode { kPrivate, kNoiselessForTesting };

inline const char* MechanismName(SelectionMechanism m) {
  return m == SelectionMechanism::kPermuteAndFlip ? "permute_and_flip"
                                                  : "exponential";
}

// Exactly one of epsilon / epsilon_tilde.
struct BudgetSpec {
  std::optional<double> epsilon;
  std::optional<double> epsilon_tilde;
  // Defaults to 1 / n^2.
  std::optional<double> delta;
};

struct RunConfig {
  BudgetSpec budget;
  int rounds = 100;
  SelectionMechanism mechanism = SelectionMechanism::kPermuteAndFlip;
  OutputMode output = OutputMode::kLastIterate;
  bool replay = true;
  std::optional<double> probe_epsilon;
  std::uint64_t seed = 0;
  // Records the true max error per iteration in the trace. Not private.
  bool diagnostics = false;
  NoiseMode noise = NoiseMode::kPrivate;
  // Largest full domain MwemRun will enumerate.
  double domain_cap = 1e7;
};

inline PrivacyBudget ResolveBudget(const RunConfig& cfg, std::size_t n) {
  Require(cfg.rounds >= 1, ErrorCode::kConfig, "T must be at least 1");
  const BudgetSpec& b = cfg.budget;
  const double delta =
      b.delta.value_or(1.0 / (static_cast<double>(n) * static_cast<double>(n)));
  if (cfg.noise == NoiseMode::kNoiselessForTesting && !b.epsilon &&
      !b.epsilon_tilde) {
    return PrivacyBudget{0.0, cfg.rounds, 0.0, delta};
  }
  Require(b.epsilon.has_value() != b.epsilon_tilde.has_value(),
          ErrorCode::kConfig,
          "supply exactly one of epsilon and epsilon_tilde");
  if (b.epsilon) return PrivacyBudget::FromApproxDp(*b.epsilon, cfg.rounds, delta);
  return PrivacyBudget::FromZcdp(*b.epsilon_tilde, cfg.rounds, delta);
}

// Past (query, measurement) pairs. `staleness` holds c_i = |q_i(A) - a_i|
// from the latest replay pass.
struct MeasurementLog {
  struct Entry {
    std::size_t query = 0;
    double measured = 0.0;
    double staleness = 0.0;
  };
  std::vector<Entry> entries;

  std::size_t size() const { return entries.size(); }
  void Append(std::size_t query, double measured) {
    entries.push_back(Entry{query, measured, 0.0});
  }
};

struct TraceRow {
  int iteration = 0;
  std::size_t query = 0;
  // |q_t(A_{t-1}) - a_t|: the noisy error of the selected query.
  double noisy_gap = 0.0;
  double measured = 0.0;
  std::size_t replayed = 0;
  // True max error of A_{t-1}; set only when diagnostics are on.
  std::optional<double> max_error;

  bool operator==(const TraceRow&) const = default;
};

struct RunReport {
  std::string algorithm;
  bool private_run = true;
  Distribution distribution;
  ErrorMetrics metrics;
  PrivacyLedger ledger;
  std::vector<TraceRow> trace;
};

struct MixtureErrorReport {
  double estimate = 0.0;
  int iterations = 0;
  // Iterate that attained the estimate (0 = the uniform start).
  int best_iteration = 0;
  std::optional<double> released;
};

namespace internal {

// In-place multiplicative-weights state over one support.
class MwState {
 public:
  MwState(const Distribution& initial, const QuerySet& queries)
      : support_(initial.support()),
        log_weights_(initial.log_weights()),
        matrix_(initial.support(), queries),
        queries_(&queries) {
    NormalizeLogWeights(log_weights_, weights_);
  }

  double Answer(std::size_t query) { return matrix_.Dot(query, weights_); }

  // A(x) <- A(x) exp(phi(x) (measured - q(A)) / 2), then renormalize.
  void Update(std::size_t query, double measured) {
    const double step = (measured - Answer(query)) / 2.0;
    if (step == 0.0) return;
    for (std::uint32_t x : matrix_.Row(query)) log_weights_[x] += step;
    NormalizeLogWeights(log_weights_, weights_);
  }

  void AllAnswers(std::vector<double>& out) const {
    out = queries_->WeightedAnswers(support_->points(), weights_);
  }

  const std::vector<double>& weights() const { return weights_; }
  const SupportPtr& support() const { return support_; }
  Distribution ToDistribution() const {
    return Distribution(support_, log_weights_);
  }

 private:
  SupportPtr support_;
  std::vector<double> log_weights_;
  std::vector<double> weights_;
  AnswerMatrix matrix_;
  const QuerySet* queries_;
};

}  // namespace internal

// Single multiplicative-weights step on `q` towards `measured`.
inline Distribution MwUpdate(const Distribution& a, const MarginalQuery& q,
                             double measured) {
  Require(measured >= 0.0 && measured <= 1.0, ErrorCode::kInvalidArgument,
          "measurement must lie in [0, 1]");
  const double answer = EvaluateOnDistribution(q, a);
  const double step = (measured - answer) / 2.0;
  std::vector<double> log_weights = a.log_weights();
  const Support& support = *a.support();
  for (std::size_t x = 0; x < support.size(); ++x) {
    if (q.Matches(support.point(x))) log_weights[x] += step;
  }
  std::vector<double> weights;
  internal::NormalizeLogWeights(log_weights, weights);
  return Distribution(a.support(), std::move(log_weights));
}

// Indices i with staleness[i] >= staleness.back() / 2. The last entry always
// qualifies.
inline std::vector<std::size_t> StaleEntries(std::span<const double> staleness) {
  std::vector<std::size_t> selected;
  if (staleness.empty()) return selected;
  const double threshold = staleness.back() / 2.0;
  for (std::size_t i = 0; i < staleness.size(); ++i) {
    if (staleness[i] >= threshold) selected.push_back(i);
  }
  return selected;
}

namespace internal {

// Scores every logged measurement against the current distribution, then
// replays the stale ones in random order. Returns the number replayed.
template <typename Rng>
std::size_t ReplayInPlace(MwState& state, MeasurementLog& log, Rng& rng) {
  Require(log.size() >= 1, ErrorCode::kInvalidArgument,
          "replay needs at least one measurement");
  std::vector<double> staleness(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    auto& e = log.entries[i];
    e.staleness = std::abs(state.Answer(e.query) - e.measured);
    staleness[i] = e.staleness;
  }
  std::vector<std::size_t> selected = StaleEntries(staleness);
  std::shuffle(selected.begin(), selected.end(), rng);
  for (std::size_t i : selected) {
    state.Update(log.entries[i].query, log.entries[i].measured);
  }
  return selected.size();
}

}  // namespace internal

template <typename Rng>
Distribution ReplayPass(const Distribution& a, MeasurementLog& log,
                        const QuerySet& queries, Rng& rng,
                        std::size_t* replayed = nullptr) {
  internal::MwState state(a, queries);
  const std::size_t count = internal::ReplayInPlace(state, log, rng);
  if (replayed != nullptr) *replayed = count;
  return state.ToDistribution();
}

namespace internal {

inline RunReport RunMultiplicativeWeights(std::string algorithm,
                                          const Dataset& private_data,
                                          const Distribution& initial,
                                          const QuerySet& queries,
                                          const RunConfig& cfg) {
  Require(!queries.empty(), ErrorCode::kConfig, "empty query set");
  queries.CheckSchema(private_data.schema());
  queries.CheckSchema(initial.support()->schema());
  Require(!private_data.empty(), ErrorCode::kInvalidArgument,
          "private dataset is empty");
  const bool is_private = cfg.noise == NoiseMode::kPrivate;
  const std::size_t n = private_data.size();
  const PrivacyBudget budget = ResolveBudget(cfg, n);

  RunReport report;
  report.algorithm = std::move(algorithm);
  report.private_run = is_private;
  report.ledger = PrivacyLedger(budget, cfg.probe_epsilon.value_or(0.0));
  report.trace.reserve(cfg.rounds);

  const std::vector<double> truth = queries.AnswersOn(private_data);
  std::mt19937_64 rng(cfg.seed);
  MwState state(initial, queries);
  MeasurementLog log;
  std::vector<double> answers;
  std::vector<double> scores(truth.size());
  std::vector<double> weight_sum;
  if (cfg.output == OutputMode::kAverage) {
    weight_sum.assign(state.weights().size(), 0.0);
  }
  const double sensitivity = 1.0 / static_cast<double>(n);

  for (int t = 1; t <= cfg.rounds; ++t) {
    if (!weight_sum.empty()) {
      for (std::size_t x = 0; x < weight_sum.size(); ++x) {
        weight_sum[x] += state.weights()[x];
      }
    }
    state.AllAnswers(answers);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      scores[i] = std::abs(answers[i] - truth[i]);
    }

    std::size_t selected = 0;
    if (is_private) {
      const SelectionScores s{scores, sensitivity, budget.epsilon0};
      selected = cfg.mechanism == SelectionMechanism::kPermuteAndFlip
                     ? PermuteAndFlipSelect(s, rng)
                     : ExponentialSelect(s, rng);
      report.ledger.ChargeRound(MechanismName(cfg.mechanism), t);
    } else {
      selected = ArgmaxSelect(scores);
    }

    const double current = state.Answer(selected);
    double measured = truth[selected];
    if (is_private) {
      measured = GaussianMeasure(truth[selected], n, budget.epsilon0, rng);
      report.ledger.ChargeRound("gaussian", t);
    }
    log.Append(selected, measured);

    std::size_t replayed = 1;
    if (cfg.replay) {
      replayed = ReplayInPlace(state, log, rng);
    } else {
      state.Update(selected, measured);
    }

    TraceRow row{t, selected, std::abs(current - measured), measured,
                 replayed, std::nullopt};
    if (cfg.diagnostics) {
      row.max_error = *std::max_element(scores.begin(), scores.end());
    }
    report.trace.push_back(row);
  }

  if (cfg.output == OutputMode::kAverage) {
    std::vector<double> log_weights(weight_sum.size());
    for (std::size_t x = 0; x < weight_sum.size(); ++x) {
      log_weights[x] = std::log(weight_sum[x] / cfg.rounds);
    }
    report.distribution =
        Normalize(Distribution(state.support(), std::move(log_weights)));
  } else {
    report.distribution = state.ToDistribution();
  }
  const std::vector<double> final_weights = report.distribution.Weights();
  const std::vector<double> final_answers =
      queries.WeightedAnswers(state.support()->points(), final_weights);
  report.metrics = ComputeErrorMetrics(truth, final_answers);
  return report;
}

}  // namespace internal

inline RunReport PmwPubRun(const Dataset& private_data,
                           const Dataset& public_data, const QuerySet& queries,
                           const RunConfig& cfg) {
  Require(SameSchema(private_data.schema(), public_data.schema()),
          ErrorCode::kSchemaMismatch,
          "private and public datasets use different schemas");
  Require(!public_data.empty(), ErrorCode::kInvalidArgument,
          "public dataset is empty");
  return internal::RunMultiplicativeWeights(
      "pmwpub", private_data, EmpiricalDistribution(public_data), queries, cfg);
}

// Same loop over the enumerated full domain, starting from uniform.
inline RunReport MwemRun(const Dataset& private_data, const QuerySet& queries,
                         const RunConfig& cfg) {
  Dataset domain = EnumerateDomain(private_data.schema(), cfg.domain_cap);
  return internal::RunMultiplicativeWeights(
      "mwem", private_data, EmpiricalDistribution(domain), queries, cfg);
}

// Upper estimate of the best mixture error min_{mu on support} max_q
// |q(mu) - q(D)|: noiseless multiplicative weights from uniform, always
// correcting the worst query with its exact answer. Candidates are every
// iterate and every running average of iterates; the smallest max error among
// them is reported. Each candidate is a distribution on the support, so the
// estimate never falls below the true minimum.
inline MixtureErrorReport BestMixtureError(const Dataset& private_data,
                                           const Support& support,
                                           const QuerySet& queries,
                                           int iterations = 100) {
  Require(support.size() >= 1, ErrorCode::kInvalidArgument,
          "support is empty");
  Require(iterations >= 0, ErrorCode::kInvalidArgument,
          "iteration count must be nonnegative");
  Require(!queries.empty(), ErrorCode::kConfig, "empty query set");
  queries.CheckSchema(support.schema());
  const std::vector<double> truth = queries.AnswersOn(private_data);
  auto support_ptr = std::make_shared<const Support>(support);
  internal::MwState state(UniformDistribution(support_ptr), queries);

  MixtureErrorReport report;
  report.iterations = iterations;
  report.estimate = std::numeric_limits<double>::infinity();
  std::vector<double> answers;
  std::vector<double> answer_sum(truth.size(), 0.0);
  std::vector<double> average(truth.size());
  for (int t = 0;; ++t) {
    state.AllAnswers(answers);
    const ErrorMetrics m = ComputeErrorMetrics(truth, answers);
    if (m.max < report.estimate) {
      report.estimate = m.max;
      report.best_iteration = t;
    }
    for (std::size_t q = 0; q < truth.size(); ++q) {
      answer_sum[q] += answers[q];
      average[q] = answer_sum[q] / static_cast<double>(t + 1);
    }
    const double average_max = ComputeErrorMetrics(truth, average).max;
    if (average_max < report.estimate) {
      report.estimate = average_max;
      report.best_iteration = t;
    }
    if (t == iterations) break;
    state.Update(m.worst_index, truth[m.worst_index]);
  }
  return report;
}

// Laplace release of the estimate at sensitivity 1/n, charged to `ledger`
// before any noise is drawn.
template <typename Rng>
double ReleaseMixtureError(MixtureErrorReport& report, std::size_t n,
                           double epsilon_probe, Rng& rng,
                           PrivacyLedger& ledger) {
  Require(n >= 1, ErrorCode::kInvalidArgument, "n must be at least 1");
  Require(epsilon_probe > 0.0, ErrorCode::kInvalidArgument,
          "probe epsilon must be positive");
  ledger.ChargeProbe(epsilon_probe);
  const double released = LaplaceRelease(
      report.estimate, 1.0 / static_cast<double>(n), epsilon_probe, rng);
  report.released = released;
  return released;
}

// n_out i.i.d. draws from `a`. Post-processing; spends no budget.
template <typename Rng>
Dataset SynthesizeDataset(const Distribution& a, std::size_t n_out, Rng& rng) {
  Require(n_out >= 1, ErrorCode::kInvalidArgument,
          "synthetic dataset size must be at least 1");
  Require(a.IsNormalized(), ErrorCode::kInvalidArgument,
          "distribution is not normalized");
  const std::vector<double> weights = a.Weights();
  std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
  const Support& support = *a.support();
  Dataset out(support.schema());
  out.Reserve(n_out);
  for (std::size_t i = 0; i < n_out; ++i) out.Append(support.point(draw(rng)));
  return out;
}

}  // namespace pmwpub
