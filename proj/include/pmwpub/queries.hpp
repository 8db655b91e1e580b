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

// k-way marginal queries, workloads, flattened query sets and their
// evaluation on datasets and distributions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pmwpub/domain.hpp"
#include "pmwpub/status.hpp"

namespace pmwpub {

// phi_{S,y}(x) = 1 iff x agrees with `target` on every attribute in
// `attributes`.
struct MarginalQuery {
  std::vector<std::size_t> attributes;
  std::vector<CategoryIndex> target;

  bool Matches(RecordView record) const {
    for (std::size_t j = 0; j < attributes.size(); ++j) {
      if (record[attributes[j]] != target[j]) return false;
    }
    return true;
  }

  void Validate(const Schema& schema) const {
    Require(attributes.size() == target.size(), ErrorCode::kInvalidArgument,
            "marginal query attribute and target sizes differ");
    for (std::size_t j = 0; j < attributes.size(); ++j) {
      Require(attributes[j] < schema.size(), ErrorCode::kSchemaMismatch,
              "query attribute index out of range for the schema");
      Require(j == 0 || attributes[j - 1] < attributes[j],
              ErrorCode::kInvalidArgument,
              "query attributes must be strictly increasing");
      Require(target[j] < schema.cardinality(attributes[j]),
              ErrorCode::kSchemaMismatch,
              "query target value exceeds the attribute cardinality");
    }
  }

  bool operator==(const MarginalQuery&) const = default;
};

// All marginal queries over one attribute set. Cells are laid out row-major
// over `attributes` (last attribute varies fastest).
struct Workload {
  std::vector<std::size_t> attributes;

  std::size_t Size(const Schema& schema) const {
    std::size_t size = 1;
    for (std::size_t a : attributes) size *= schema.cardinality(a);
    return size;
  }

  std::vector<MarginalQuery> Enumerate(const Schema& schema) const {
    std::vector<MarginalQuery> queries;
    const std::size_t size = Size(schema);
    queries.reserve(size);
    for (std::size_t cell = 0; cell < size; ++cell) {
      queries.push_back(QueryForCell(schema, cell));
    }
    return queries;
  }

  MarginalQuery QueryForCell(const Schema& schema, std::size_t cell) const {
    MarginalQuery q{attributes, std::vector<CategoryIndex>(attributes.size())};
    for (std::size_t j = attributes.size(); j-- > 0;) {
      const std::size_t card = schema.cardinality(attributes[j]);
      q.target[j] = static_cast<CategoryIndex>(cell % card);
      cell /= card;
    }
    return q;
  }

  bool operator==(const Workload&) const = default;
};

// Workloads flattened into one indexed query list. Query i lives in workload
// w where offset(w) <= i < offset(w + 1).
class QuerySet {
 public:
  QuerySet() = default;

  QuerySet(SchemaPtr schema, std::vector<Workload> workloads)
      : schema_(std::move(schema)), workloads_(std::move(workloads)) {
    offsets_.reserve(workloads_.size() + 1);
    offsets_.push_back(0);
    strides_.reserve(workloads_.size());
    for (const Workload& w : workloads_) {
      Require(!w.attributes.empty(), ErrorCode::kInvalidArgument,
              "workload with no attributes");
      for (std::size_t j = 0; j < w.attributes.size(); ++j) {
        Require(w.attributes[j] < schema_->size(), ErrorCode::kSchemaMismatch,
                "workload attribute index out of range");
        Require(j == 0 || w.attributes[j - 1] < w.attributes[j],
                ErrorCode::kInvalidArgument,
                "workload attributes must be strictly increasing");
      }
      std::vector<std::size_t> strides(w.attributes.size());
      std::size_t stride = 1;
      for (std::size_t j = w.attributes.size(); j-- > 0;) {
        strides[j] = stride;
        stride *= schema_->cardinality(w.attributes[j]);
      }
      strides_.push_back(std::move(strides));
      offsets_.push_back(offsets_.back() + stride);
    }
  }

  const SchemaPtr& schema() const { return schema_; }
  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.back(); }
  bool empty() const { return size() == 0; }
  std::size_t num_workloads() const { return workloads_.size(); }
  const std::vector<Workload>& workloads() const { return workloads_; }
  const Workload& workload(std::size_t w) const { return workloads_.at(w); }
  std::size_t offset(std::size_t w) const { return offsets_.at(w); }

  std::size_t WorkloadOf(std::size_t index) const {
    Require(index < size(), ErrorCode::kInvalidArgument,
            "query index out of range");
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
    return static_cast<std::size_t>(it - offsets_.begin()) - 1;
  }

  MarginalQuery query(std::size_t index) const {
    const std::size_t w = WorkloadOf(index);
    return workloads_[w].QueryForCell(*schema_, index - offsets_[w]);
  }

  // Flat query index of the cell `record` falls into within workload w.
  std::size_t CellIndex(std::size_t w, RecordView record) const {
    const auto& attrs = workloads_[w].attributes;
    const auto& strides = strides_[w];
    std::size_t cell = offsets_[w];
    for (std::size_t j = 0; j < attrs.size(); ++j) {
      cell += record[attrs[j]] * strides[j];
    }
    return cell;
  }

  // Answers to every query on rows weighted by `weights`, one histogram pass
  // per workload. `rows` is row-major with the schema's width.
  std::vector<double> WeightedAnswers(std::span<const CategoryIndex> rows,
                                      std::span<const double> weights) const {
    const std::size_t d = schema_->size();
    const std::size_t n = weights.size();
    std::vector<double> answers(size(), 0.0);
    for (std::size_t w = 0; w < workloads_.size(); ++w) {
      for (std::size_t r = 0; r < n; ++r) {
        answers[CellIndex(w, rows.subspan(r * d, d))] += weights[r];
      }
    }
    return answers;
  }

  // q(D) for every query, from exact integer counts divided by n.
  std::vector<double> AnswersOn(const Dataset& dataset) const {
    CheckSchema(dataset.schema());
    Require(!dataset.empty(), ErrorCode::kInvalidArgument,
            "answers on an empty dataset");
    std::vector<std::uint64_t> counts(size(), 0);
    for (std::size_t w = 0; w < workloads_.size(); ++w) {
      for (std::size_t r = 0; r < dataset.size(); ++r) {
        ++counts[CellIndex(w, dataset.row(r))];
      }
    }
    std::vector<double> answers(size());
    const double n = static_cast<double>(dataset.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      answers[i] = static_cast<double>(counts[i]) / n;
    }
    return answers;
  }

  std::vector<double> AnswersOn(const Distribution& dist) const {
    CheckSchema(dist.support()->schema());
    Require(dist.IsNormalized(), ErrorCode::kInvalidArgument,
            "distribution is not normalized");
    const std::vector<double> weights = dist.Weights();
    return WeightedAnswers(dist.support()->points(), weights);
  }

  void CheckSchema(const SchemaPtr& other) const {
    Require(SameSchema(schema_, other), ErrorCode::kSchemaMismatch,
            "query set and data use different schemas");
  }

 private:
  SchemaPtr schema_;
  std::vector<Workload> workloads_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<std::size_t>> strides_;
};

inline double EvaluateOnDataset(const MarginalQuery& q, const Dataset& d) {
  Require(d.schema() != nullptr, ErrorCode::kSchemaMismatch,
          "dataset has no schema");
  q.Validate(*d.schema());
  Require(!d.empty(), ErrorCode::kInvalidArgument, "empty dataset");
  std::uint64_t count = 0;
  for (std::size_t r = 0; r < d.size(); ++r) count += q.Matches(d.row(r));
  return static_cast<double>(count) / static_cast<double>(d.size());
}

inline double EvaluateOnDistribution(const MarginalQuery& q,
                                     const Distribution& a) {
  q.Validate(*a.support()->schema());
  Require(a.IsNormalized(), ErrorCode::kInvalidArgument,
          "distribution is not normalized");
  const Support& support = *a.support();
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (q.Matches(support.point(i))) total += std::exp(a.log_weights()[i]);
  }
  return total;
}

// Lazily materialized 0/1 rows of the query-by-support predicate matrix,
// stored sparsely as the indices of matching support points. Not thread-safe;
// owned by a single engine run.
class AnswerMatrix {
 public:
  AnswerMatrix(SupportPtr support, const QuerySet& queries)
      : support_(std::move(support)), queries_(&queries) {
    queries.CheckSchema(support_->schema());
  }

  const std::vector<std::uint32_t>& Row(std::size_t query_index) {
    auto it = rows_.find(query_index);
    if (it != rows_.end()) return it->second;
    const std::size_t w = queries_->WorkloadOf(query_index);
    std::vector<std::uint32_t> row;
    for (std::size_t x = 0; x < support_->size(); ++x) {
      if (queries_->CellIndex(w, support_->point(x)) == query_index) {
        row.push_back(static_cast<std::uint32_t>(x));
      }
    }
    return rows_.emplace(query_index, std::move(row)).first->second;
  }

  double Dot(std::size_t query_index, std::span<const double> weights) {
    double total = 0.0;
    for (std::uint32_t x : Row(query_index)) total += weights[x];
    return total;
  }

  std::size_t cached_rows() const { return rows_.size(); }
  const SupportPtr& support() const { return support_; }

 private:
  SupportPtr support_;
  const QuerySet* queries_;
  std::unordered_map<std::size_t, std::vector<std::uint32_t>> rows_;
};

struct ErrorMetrics {
  double max = 0.0;
  double mean = 0.0;
  double mse = 0.0;
  // Lowest index attaining `max`.
  std::size_t worst_index = 0;
};

inline ErrorMetrics ComputeErrorMetrics(std::span<const double> truth,
                                        std::span<const double> estimate) {
  Require(!truth.empty(), ErrorCode::kInvalidArgument, "empty query set");
  Require(truth.size() == estimate.size(), ErrorCode::kInvalidArgument,
          "answer vectors differ in length");
  ErrorMetrics m;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = std::abs(truth[i] - estimate[i]);
    if (e > m.max) {
      m.max = e;
      m.worst_index = i;
    }
    sum += e;
    sum_sq += e * e;
  }
  const double count = static_cast<double>(truth.size());
  m.mean = sum / count;
  m.mse = sum_sq / count;
  return m;
}

inline ErrorMetrics EvaluateErrors(const QuerySet& qs, const Dataset& d,
                                   const Distribution& a) {
  Require(!qs.empty(), ErrorCode::kInvalidArgument, "empty query set");
  const std::vector<double> truth = qs.AnswersOn(d);
  const std::vector<double> estimate = qs.AnswersOn(a);
  return ComputeErrorMetrics(truth, estimate);
}

// (index, value) of the largest |q(D) - q(A)|; lowest index on ties.
inline std::pair<std::size_t, double> WorstError(const QuerySet& qs,
                                                 const Dataset& d,
                                                 const Distribution& a) {
  const ErrorMetrics m = EvaluateErrors(qs, d, a);
  return {m.worst_index, m.max};
}

// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t BinomialCoefficient(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(result);
}

namespace internal {

// All k-subsets of {0..d-1} in lexicographic order.
inline std::vector<std::vector<std::size_t>> AllSubsets(std::size_t d,
                                                        std::size_t k) {
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::size_t> current(k);
  std::iota(current.begin(), current.end(), 0);
  while (true) {
    subsets.push_back(current);
    std::size_t i = k;
    while (i > 0 && current[i - 1] == d - k + i - 1) --i;
    if (i == 0) break;
    ++current[i - 1];
    for (std::size_t j = i; j < k; ++j) current[j] = current[j - 1] + 1;
  }
  return subsets;
}

}  // namespace internal

// `count` distinct k-attribute workloads sampled uniformly without
// replacement; all of them, in lexicographic order, when count == C(d, k).
// Sampled workloads are returned sorted lexicographically.
inline std::vector<Workload> BuildWorkloads(const Schema& schema, std::size_t k,
                                            std::size_t count,
                                            std::uint64_t seed) {
  const std::size_t d = schema.size();
  Require(k >= 1 && k <= d, ErrorCode::kConfig,
          "workload size k must be in [1, number of attributes]");
  const std::uint64_t total = BinomialCoefficient(d, k);
  Require(count >= 1 && count <= total, ErrorCode::kConfig,
          "requested " + std::to_string(count) + " workloads but only " +
              std::to_string(total) + " attribute subsets exist");
  std::vector<std::vector<std::size_t>> chosen;
  if (count == total) {
    chosen = internal::AllSubsets(d, k);
  } else if (total <= 2'000'000) {
    std::vector<std::vector<std::size_t>> all = internal::AllSubsets(d, k);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    all.resize(count);
    chosen = std::move(all);
    std::sort(chosen.begin(), chosen.end());
  } else {
    // Rejection sampling; C(d, k) dwarfs count here.
    std::mt19937_64 rng(seed);
    std::set<std::vector<std::size_t>> seen;
    while (seen.size() < count) {
      // Floyd's algorithm for a uniform k-subset.
      std::set<std::size_t> subset;
      for (std::size_t j = d - k; j < d; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        const std::size_t t = pick(rng);
        if (!subset.insert(t).second) subset.insert(j);
      }
      seen.emplace(subset.begin(), subset.end());
    }
    chosen.assign(seen.begin(), seen.end());
  }
  std::vector<Workload> workloads;
  workloads.reserve(chosen.size());
  for (auto& attrs : chosen) workloads.push_back(Workload{std::move(attrs)});
  return workloads;
}

}  // namespace pmwpub
