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

#include "pmwpub/queries.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "pmwpub/status.hpp"

namespace pmwpub {
namespace {

SchemaPtr MakeSchema(std::vector<std::size_t> cards) {
  std::vector<Attribute> attrs;
  for (std::size_t i = 0; i < cards.size(); ++i) {
    attrs.push_back(Attribute{"a" + std::to_string(i), cards[i], {}, {}});
  }
  return std::make_shared<const Schema>(Schema(std::move(attrs)));
}

Dataset RandomDataset(const SchemaPtr& schema, std::size_t rows,
                      std::mt19937_64& rng) {
  Dataset d(schema);
  Record rec(schema->size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < rec.size(); ++j) {
      rec[j] = static_cast<CategoryIndex>(rng() % schema->cardinality(j));
    }
    d.Append(rec);
  }
  return d;
}

TEST(MarginalQueryTest, EvaluatesOnDataset) {
  const SchemaPtr schema = MakeSchema({2, 2});
  const Dataset d(schema, std::vector<Record>{{0, 0}, {0, 1}, {1, 1}, {1, 1}});
  EXPECT_DOUBLE_EQ(EvaluateOnDataset(MarginalQuery{{0}, {1}}, d), 0.5);
  EXPECT_DOUBLE_EQ(EvaluateOnDataset(MarginalQuery{{0, 1}, {1, 1}}, d), 0.5);
  EXPECT_DOUBLE_EQ(EvaluateOnDataset(MarginalQuery{{0, 1}, {1, 0}}, d), 0.0);
}

TEST(MarginalQueryTest, EvaluatesOnDistribution) {
  const SchemaPtr schema = MakeSchema({2, 2});
  const Dataset d(schema, std::vector<Record>{{0, 0}, {1, 1}, {1, 1}, {1, 1}});
  const Distribution a = EmpiricalDistribution(d);
  EXPECT_NEAR(EvaluateOnDistribution(MarginalQuery{{0}, {1}}, a), 0.75, 1e-15);
}

TEST(MarginalQueryTest, RejectsOutOfRangeTargets) {
  const SchemaPtr schema = MakeSchema({2, 3});
  EXPECT_THROW(MarginalQuery({{1}, {3}}).Validate(*schema), Error);
  EXPECT_THROW(MarginalQuery({{2}, {0}}).Validate(*schema), Error);
  EXPECT_THROW(MarginalQuery({{1, 0}, {0, 0}}).Validate(*schema), Error);
}

TEST(MarginalQueryTest, UnnormalizedDistributionIsAnError) {
  const SchemaPtr schema = MakeSchema({2});
  const Dataset d(schema, std::vector<Record>{{0}, {1}});
  auto support = std::make_shared<const Support>(Support::FromDataset(d));
  const Distribution raw(support, {0.0, 0.0});
  EXPECT_THROW(EvaluateOnDistribution(MarginalQuery{{0}, {0}}, raw), Error);
}

TEST(WorkloadTest, SizeIsTheProductOfCardinalities) {
  const SchemaPtr schema = MakeSchema({2, 3, 4});
  EXPECT_EQ((Workload{{0, 2}}.Size(*schema)), 8u);
  EXPECT_EQ((Workload{{0, 1, 2}}.Enumerate(*schema).size()), 24u);
}

TEST(QuerySetTest, EachWorkloadSumsToOneOnAnyDistribution) {
  std::mt19937_64 rng(5);
  const SchemaPtr schema = MakeSchema({2, 3, 4, 5});
  const Dataset d = RandomDataset(schema, 200, rng);
  const QuerySet qs(schema, BuildWorkloads(*schema, 2, 6, 0));
  std::vector<double> logs(Support::FromDataset(d).size());
  std::normal_distribution<double> g(0.0, 2.0);
  for (double& l : logs) l = g(rng);
  auto support = std::make_shared<const Support>(Support::FromDataset(d));
  const Distribution a = Normalize(Distribution(support, logs));
  const std::vector<double> answers = qs.AnswersOn(a);
  for (std::size_t w = 0; w < qs.num_workloads(); ++w) {
    double total = 0.0;
    const std::size_t end = qs.offset(w) + qs.workload(w).Size(*schema);
    for (std::size_t i = qs.offset(w); i < end; ++i) total += answers[i];
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(QuerySetTest, AnswersMatchBruteForce) {
  std::mt19937_64 rng(17);
  const SchemaPtr schema = MakeSchema({3, 2, 4, 2, 5});
  const Dataset d = RandomDataset(schema, 500, rng);
  const QuerySet qs(schema, BuildWorkloads(*schema, 3, 10, 1));
  const std::vector<double> fast = qs.AnswersOn(d);
  const std::vector<double> slow = testing::BruteForceAnswers(qs, d);
  ASSERT_EQ(fast.size(), slow.size());
  for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_EQ(fast[i], slow[i]);
}

TEST(QuerySetTest, QueryIndexRoundTripsThroughCells) {
  const SchemaPtr schema = MakeSchema({3, 2, 4});
  const QuerySet qs(schema, {Workload{{0, 2}}, Workload{{1}}});
  EXPECT_EQ(qs.size(), 14u);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const MarginalQuery q = qs.query(i);
    Record rec(3, 0);
    for (std::size_t j = 0; j < q.attributes.size(); ++j) {
      rec[q.attributes[j]] = q.target[j];
    }
    EXPECT_EQ(qs.CellIndex(qs.WorkloadOf(i), rec), i);
  }
}

TEST(AnswerMatrixTest, AgreesWithDirectEvaluation) {
  std::mt19937_64 rng(23);
  const SchemaPtr schema = MakeSchema({3, 3, 2, 4, 2, 3});
  const Dataset d = RandomDataset(schema, 400, rng);
  auto support = std::make_shared<const Support>(Support::FromDataset(d));
  const QuerySet qs(schema, BuildWorkloads(*schema, 3, 20, 2));
  AnswerMatrix matrix(support, qs);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int pair = 0; pair < 1000; ++pair) {
    std::vector<double> logs(support->size());
    for (double& l : logs) l = g(rng);
    const Distribution a = Normalize(Distribution(support, logs));
    const std::size_t q = rng() % qs.size();
    EXPECT_NEAR(matrix.Dot(q, a.Weights()),
                EvaluateOnDistribution(qs.query(q), a), 1e-12);
  }
  EXPECT_LE(matrix.cached_rows(), qs.size());
}

TEST(ErrorMetricsTest, SmallExample) {
  const std::vector<double> truth = {0.5, 0.2};
  const std::vector<double> est = {0.4, 0.5};
  const ErrorMetrics m = ComputeErrorMetrics(truth, est);
  EXPECT_NEAR(m.max, 0.3, 1e-15);
  EXPECT_NEAR(m.mean, 0.2, 1e-15);
  EXPECT_NEAR(m.mse, 0.05, 1e-15);
  EXPECT_EQ(m.worst_index, 1u);
}

TEST(ErrorMetricsTest, TiesPickTheLowestIndex) {
  const std::vector<double> truth = {0.0, 0.0, 0.0};
  const std::vector<double> est = {0.1, 0.2, 0.2};
  EXPECT_EQ(ComputeErrorMetrics(truth, est).worst_index, 1u);
}

TEST(ErrorMetricsTest, EmptyQuerySetIsAnError) {
  EXPECT_THROW(ComputeErrorMetrics({}, {}), Error);
}

TEST(ErrorMetricsTest, WorstErrorOnExample) {
  const SchemaPtr schema = MakeSchema({2});
  const Dataset d(schema, std::vector<Record>{{0}, {0}, {0}, {1}});
  const Dataset pub(schema, std::vector<Record>{{0}, {1}});
  const QuerySet qs(schema, {Workload{{0}}});
  const auto [index, value] = WorstError(qs, d, EmpiricalDistribution(pub));
  EXPECT_EQ(index, 0u);
  EXPECT_NEAR(value, 0.25, 1e-15);
}

TEST(BinomialTest, KnownValues) {
  EXPECT_EQ(BinomialCoefficient(15, 5), 3003u);
  EXPECT_EQ(BinomialCoefficient(67, 3), 47905u);
  EXPECT_EQ(BinomialCoefficient(13, 3), 286u);
  EXPECT_EQ(BinomialCoefficient(3, 4), 0u);
}

TEST(BuildWorkloadsTest, AllSubsetsWhenCountIsComplete) {
  const SchemaPtr schema = MakeSchema(std::vector<std::size_t>(15, 2));
  const std::vector<Workload> all = BuildWorkloads(*schema, 5, 3003, 0);
  ASSERT_EQ(all.size(), 3003u);
  std::set<std::vector<std::size_t>> distinct;
  for (const Workload& w : all) distinct.insert(w.attributes);
  EXPECT_EQ(distinct.size(), 3003u);
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end(),
                             [](const Workload& a, const Workload& b) {
                               return a.attributes < b.attributes;
                             }));
}

TEST(BuildWorkloadsTest, SampledWorkloadsAreDistinctAndSeeded) {
  const SchemaPtr schema = MakeSchema(std::vector<std::size_t>(67, 2));
  const std::vector<Workload> a = BuildWorkloads(*schema, 3, 4096, 9);
  const std::vector<Workload> b = BuildWorkloads(*schema, 3, 4096, 9);
  const std::vector<Workload> c = BuildWorkloads(*schema, 3, 4096, 10);
  ASSERT_EQ(a.size(), 4096u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::set<std::vector<std::size_t>> distinct;
  for (const Workload& w : a) {
    EXPECT_EQ(w.attributes.size(), 3u);
    EXPECT_TRUE(std::is_sorted(w.attributes.begin(), w.attributes.end()));
    distinct.insert(w.attributes);
  }
  EXPECT_EQ(distinct.size(), 4096u);
}

TEST(BuildWorkloadsTest, LargeSubsetSpaceUsesRejectionSampling) {
  const SchemaPtr schema = MakeSchema(std::vector<std::size_t>(67, 2));
  const std::vector<Workload> w = BuildWorkloads(*schema, 5, 500, 4);
  std::set<std::vector<std::size_t>> distinct;
  for (const Workload& x : w) {
    std::set<std::size_t> attrs(x.attributes.begin(), x.attributes.end());
    EXPECT_EQ(attrs.size(), 5u);
    EXPECT_LT(*attrs.rbegin(), 67u);
    distinct.insert(x.attributes);
  }
  EXPECT_EQ(distinct.size(), 500u);
}

TEST(BuildWorkloadsTest, TooManyWorkloadsIsAConfigError) {
  const SchemaPtr schema = MakeSchema(std::vector<std::size_t>(5, 2));
  try {
    BuildWorkloads(*schema, 3, 11, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

// Every subset is equally likely to be drawn.
TEST(BuildWorkloadsTest, SamplingIsUniformOverSubsets) {
  const SchemaPtr schema = MakeSchema(std::vector<std::size_t>(6, 2));
  std::map<std::vector<std::size_t>, int> counts;
  const int trials = 4000;
  for (int s = 0; s < trials; ++s) {
    for (const Workload& w : BuildWorkloads(*schema, 2, 3, s)) {
      ++counts[w.attributes];
    }
  }
  ASSERT_EQ(counts.size(), 15u);
  const double expected = trials * 3.0 / 15.0;
  double chi2 = 0.0;
  for (const auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 14 degrees of freedom; 0.999 quantile is 36.1.
  EXPECT_LT(chi2, 36.1);
}

}  // namespace
}  // namespace pmwpub
