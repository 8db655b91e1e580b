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

// Data universe: schemas over categorical attributes, datasets of encoded
// records, deduplicated supports, and log-space distributions over supports.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pmwpub/status.hpp"

namespace pmwpub {

using CategoryIndex = std::uint16_t;
using Record = std::vector<CategoryIndex>;
using RecordView = std::span<const CategoryIndex>;

struct Attribute {
  std::string name;
  std::size_t cardinality = 0;
  // Edges e_0 < ... < e_k of the bins for a numeric source column, k ==
  // cardinality. Bins are [e_i, e_{i+1}) except the last, which is closed.
  std::vector<double> bin_edges;
  // Vocabulary for a string source column; position is the category index.
  std::vector<std::string> categories;

  bool operator==(const Attribute&) const = default;
};

class Schema {
 public:
  Schema() = default;

  explicit Schema(std::vector<Attribute> attributes)
      : attributes_(std::move(attributes)) {
    std::unordered_set<std::string> names;
    for (const Attribute& a : attributes_) {
      Require(a.cardinality >= 1, ErrorCode::kConfig,
              "attribute '" + a.name + "' has cardinality 0");
      Require(a.cardinality <= std::numeric_limits<CategoryIndex>::max(),
              ErrorCode::kConfig,
              "attribute '" + a.name + "' has too many categories");
      Require(names.insert(a.name).second, ErrorCode::kConfig,
              "duplicate attribute name '" + a.name + "'");
      if (!a.bin_edges.empty()) {
        Require(a.bin_edges.size() == a.cardinality + 1, ErrorCode::kConfig,
                "attribute '" + a.name +
                    "': bin edge count must be cardinality + 1");
        Require(std::is_sorted(a.bin_edges.begin(), a.bin_edges.end(),
                               std::less_equal<>()) &&
                    std::adjacent_find(a.bin_edges.begin(), a.bin_edges.end()) ==
                        a.bin_edges.end(),
                ErrorCode::kConfig,
                "attribute '" + a.name + "': bin edges must strictly increase");
      }
      if (!a.categories.empty()) {
        Require(a.categories.size() == a.cardinality, ErrorCode::kConfig,
                "attribute '" + a.name +
                    "': category list size must equal cardinality");
        Require(a.bin_edges.empty(), ErrorCode::kConfig,
                "attribute '" + a.name + "' has both bins and categories");
      }
    }
  }

  std::size_t size() const { return attributes_.size(); }
  const Attribute& attribute(std::size_t i) const { return attributes_.at(i); }
  const std::vector<Attribute>& attributes() const { return attributes_; }
  std::size_t cardinality(std::size_t i) const {
    return attributes_[i].cardinality;
  }

  std::optional<std::size_t> IndexOf(std::string_view name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
      if (attributes_[i].name == name) return i;
    }
    return std::nullopt;
  }

  // log10 of the product of cardinalities; the domain itself is never built.
  double Log10DomainSize() const {
    double total = 0.0;
    for (const Attribute& a : attributes_) {
      total += std::log10(static_cast<double>(a.cardinality));
    }
    return total;
  }

  bool IsValid(RecordView record) const {
    if (record.size() != attributes_.size()) return false;
    for (std::size_t i = 0; i < record.size(); ++i) {
      if (record[i] >= attributes_[i].cardinality) return false;
    }
    return true;
  }

  bool operator==(const Schema&) const = default;

 private:
  std::vector<Attribute> attributes_;
};

using SchemaPtr = std::shared_ptr<const Schema>;

inline bool SameSchema(const SchemaPtr& a, const SchemaPtr& b) {
  return a == b || (a && b && *a == *b);
}

// Rows stored contiguously, row-major.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(SchemaPtr schema) : schema_(std::move(schema)) {}

  Dataset(SchemaPtr schema, std::vector<CategoryIndex> cells)
      : schema_(std::move(schema)), cells_(std::move(cells)) {
    const std::size_t d = width();
    Require(d > 0 || cells_.empty(), ErrorCode::kInvalidArgument,
            "dataset schema has no attributes");
    Require(d == 0 || cells_.size() % d == 0, ErrorCode::kInvalidArgument,
            "cell count is not a multiple of the schema width");
    for (std::size_t r = 0; r < size(); ++r) {
      Require(schema_->IsValid(row(r)), ErrorCode::kInvalidArgument,
              "row " + std::to_string(r) + " is invalid under the schema");
    }
  }

  Dataset(SchemaPtr schema, const std::vector<Record>& rows)
      : schema_(std::move(schema)) {
    for (const Record& r : rows) Append(r);
  }

  const SchemaPtr& schema() const { return schema_; }
  std::size_t width() const { return schema_ ? schema_->size() : 0; }
  std::size_t size() const { return width() == 0 ? 0 : cells_.size() / width(); }
  bool empty() const { return size() == 0; }

  RecordView row(std::size_t i) const {
    return RecordView(cells_.data() + i * width(), width());
  }
  const std::vector<CategoryIndex>& cells() const { return cells_; }

  void Append(RecordView record) {
    Require(schema_->IsValid(record), ErrorCode::kInvalidArgument,
            "record is invalid under the schema");
    cells_.insert(cells_.end(), record.begin(), record.end());
  }

  void Reserve(std::size_t rows) { cells_.reserve(rows * width()); }

  bool operator==(const Dataset& other) const {
    return SameSchema(schema_, other.schema_) && cells_ == other.cells_;
  }

 private:
  SchemaPtr schema_;
  std::vector<CategoryIndex> cells_;
};

namespace internal {

inline std::string RecordKey(RecordView record) {
  std::string key(record.size() * sizeof(CategoryIndex), '\0');
  if (!record.empty()) {
    std::memcpy(key.data(), record.data(), key.size());
  }
  return key;
}

}  // namespace internal

// Distinct records of a source dataset in first-occurrence order, with their
// multiplicities.
class Support {
 public:
  static Support FromDataset(const Dataset& source) {
    Support support;
    support.schema_ = source.schema();
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(source.size());
    for (std::size_t r = 0; r < source.size(); ++r) {
      RecordView row = source.row(r);
      auto [it, inserted] =
          index.emplace(internal::RecordKey(row), support.counts_.size());
      if (inserted) {
        support.points_.insert(support.points_.end(), row.begin(), row.end());
        support.counts_.push_back(1);
      } else {
        ++support.counts_[it->second];
      }
    }
    support.source_size_ = source.size();
    return support;
  }

  const SchemaPtr& schema() const { return schema_; }
  std::size_t width() const { return schema_->size(); }
  std::size_t size() const { return counts_.size(); }
  RecordView point(std::size_t i) const {
    return RecordView(points_.data() + i * width(), width());
  }
  const std::vector<CategoryIndex>& points() const { return points_; }
  const std::vector<std::size_t>& origin_counts() const { return counts_; }
  std::size_t source_size() const { return source_size_; }

  Dataset AsDataset() const { return Dataset(schema_, points_); }

 private:
  SchemaPtr schema_;
  std::vector<CategoryIndex> points_;
  std::vector<std::size_t> counts_;
  std::size_t source_size_ = 0;
};

using SupportPtr = std::shared_ptr<const Support>;

// Every record of the schema's domain in lexicographic order (last attribute
// varies fastest). Refuses domains larger than `cap` points.
inline Dataset EnumerateDomain(const SchemaPtr& schema, double cap) {
  const double log10_size = schema->Log10DomainSize();
  Require(log10_size <= std::log10(cap) + 1e-12, ErrorCode::kInfeasible,
          "full domain has ~10^" + std::to_string(log10_size) +
              " points, above the enumeration cap of " +
              std::to_string(static_cast<std::uint64_t>(cap)) + " points");
  const std::size_t d = schema->size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= schema->cardinality(i);
  std::vector<CategoryIndex> cells(total * d);
  Record current(d, 0);
  for (std::size_t r = 0; r < total; ++r) {
    std::copy(current.begin(), current.end(), cells.begin() + r * d);
    for (std::size_t i = d; i-- > 0;) {
      if (++current[i] < schema->cardinality(i)) break;
      current[i] = 0;
    }
  }
  return Dataset(schema, std::move(cells));
}

inline double LogSumExp(std::span<const double> values) {
  double max_value = -std::numeric_limits<double>::infinity();
  for (double v : values) max_value = std::max(max_value, v);
  if (!std::isfinite(max_value)) return max_value;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

// Log-weights over the points of a support. Not necessarily normalized; see
// Normalize().
class Distribution {
 public:
  // Within this tolerance a distribution counts as normalized and
  // Normalize() returns it untouched.
  static constexpr double kNormalizedTolerance = 1e-10;

  Distribution() = default;
  Distribution(SupportPtr support, std::vector<double> log_weights)
      : support_(std::move(support)), log_weights_(std::move(log_weights)) {
    Require(support_ != nullptr, ErrorCode::kInvalidArgument,
            "distribution needs a support");
    Require(log_weights_.size() == support_->size(),
            ErrorCode::kInvalidArgument,
            "log-weight count does not match the support size");
  }

  const SupportPtr& support() const { return support_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  std::size_t size() const { return log_weights_.size(); }

  std::vector<double> Weights() const {
    std::vector<double> w(log_weights_.size());
    std::transform(log_weights_.begin(), log_weights_.end(), w.begin(),
                   [](double l) { return std::exp(l); });
    return w;
  }

  bool IsNormalized(double tolerance = 1e-9) const {
    double sum = 0.0;
    for (double l : log_weights_) {
      if (std::isnan(l) || l == std::numeric_limits<double>::infinity()) {
        return false;
      }
      sum += std::exp(l);
    }
    return std::abs(sum - 1.0) <= tolerance;
  }

 private:
  SupportPtr support_;
  std::vector<double> log_weights_;
};

namespace internal {

// Shifts log-weights in place so they exponentiate to a probability vector,
// and fills `weights` with the probabilities.
inline void NormalizeLogWeights(std::vector<double>& log_weights,
                                std::vector<double>& weights) {
  for (double l : log_weights) {
    Require(!std::isnan(l) && l != std::numeric_limits<double>::infinity(),
            ErrorCode::kInvalidArgument, "log-weight is NaN or +inf");
  }
  const double lse = LogSumExp(log_weights);
  Require(std::isfinite(lse), ErrorCode::kInvalidArgument,
          "all weights are zero; distribution is degenerate");
  weights.resize(log_weights.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    weights[i] = std::exp(log_weights[i]);
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) <= Distribution::kNormalizedTolerance) return;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    log_weights[i] -= lse;
    weights[i] = std::exp(log_weights[i]);
  }
}

}  // namespace internal

inline Distribution Normalize(const Distribution& dist) {
  std::vector<double> log_weights = dist.log_weights();
  std::vector<double> weights;
  internal::NormalizeLogWeights(log_weights, weights);
  return Distribution(dist.support(), std::move(log_weights));
}

inline Distribution UniformDistribution(SupportPtr support) {
  const double l = -std::log(static_cast<double>(support->size()));
  std::vector<double> log_weights(support->size(), l);
  return Distribution(std::move(support), std::move(log_weights));
}

// Distribution over supp(dataset) with weight multiplicity / n.
inline Distribution EmpiricalDistribution(const Dataset& dataset) {
  Require(!dataset.empty(), ErrorCode::kInvalidArgument,
          "empirical distribution of an empty dataset");
  auto support = std::make_shared<const Support>(Support::FromDataset(dataset));
  const double n = static_cast<double>(dataset.size());
  std::vector<double> log_weights(support->size());
  for (std::size_t i = 0; i < support->size(); ++i) {
    log_weights[i] =
        std::log(static_cast<double>(support->origin_counts()[i]) / n);
  }
  return Distribution(std::move(support), std::move(log_weights));
}

}  // namespace pmwpub
