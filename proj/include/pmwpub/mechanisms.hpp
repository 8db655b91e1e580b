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

// Private selection (exponential, permute-and-flip) and noise addition
// (Gaussian measurement, Laplace release). Every function draws from a
// caller-supplied uniform random bit generator and never from global state.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "pmwpub/status.hpp"

namespace pmwpub {

// Candidate scores for a selection round. A larger score is a better
// candidate; `sensitivity` bounds how much any score moves between
// neighboring datasets.
struct SelectionScores {
  std::span<const double> scores;
  double sensitivity = 1.0;
  double epsilon = 1.0;
};

namespace internal {

inline void ValidateScores(const SelectionScores& s) {
  Require(!s.scores.empty(), ErrorCode::kInvalidArgument,
          "selection over zero candidates");
  Require(s.sensitivity > 0.0, ErrorCode::kInvalidArgument,
          "score sensitivity must be positive");
  Require(s.epsilon >= 0.0, ErrorCode::kInvalidArgument,
          "selection epsilon must be nonnegative");
}

inline double MaxScore(std::span<const double> scores) {
  return *std::max_element(scores.begin(), scores.end());
}

template <typename Rng>
double UniformUnit(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace internal

// Samples i with probability proportional to
// exp(epsilon * scores[i] / (2 * sensitivity)).
template <typename Rng>
std::size_t ExponentialSelect(const SelectionScores& s, Rng& rng) {
  internal::ValidateScores(s);
  const double max_score = internal::MaxScore(s.scores);
  const double scale = s.epsilon / (2.0 * s.sensitivity);
  std::vector<double> cumulative(s.scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    total += std::exp(scale * (s.scores[i] - max_score));
    cumulative[i] = total;
  }
  const double u = internal::UniformUnit(rng) * total;
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

// Visits candidates in a uniformly random order and accepts candidate i with
// probability exp(epsilon * (scores[i] - max) / (2 * sensitivity)). A maximal
// candidate accepts with probability one, so the loop always terminates.
// The permutation is drawn lazily (partial Fisher-Yates).
template <typename Rng>
std::size_t PermuteAndFlipSelect(const SelectionScores& s, Rng& rng) {
  internal::ValidateScores(s);
  const double max_score = internal::MaxScore(s.scores);
  const double scale = s.epsilon / (2.0 * s.sensitivity);
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
    const std::size_t candidate = order[i];
    const double gap = s.scores[candidate] - max_score;
    if (gap == 0.0) return candidate;
    if (internal::UniformUnit(rng) < std::exp(scale * gap)) return candidate;
  }
  // Unreachable: the maximal candidate returns above.
  return order.back();
}

// Lowest-index maximizer. Not private; noiseless test runs only.
inline std::size_t ArgmaxSelect(std::span<const double> scores) {
  Require(!scores.empty(), ErrorCode::kInvalidArgument,
          "selection over zero candidates");
  return static_cast<std::size_t>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
}

inline double ClipToUnit(double value) { return std::clamp(value, 0.0, 1.0); }

// Noise scale for a sensitivity-1/n statistic at rho = epsilon0^2 / 2.
inline double GaussianStddev(std::size_t n, double epsilon0) {
  return 1.0 / (static_cast<double>(n) * epsilon0);
}

// true_value + N(0, 1 / (n * epsilon0)^2), clipped to [0, 1].
template <typename Rng>
double GaussianMeasure(double true_value, std::size_t n, double epsilon0,
                       Rng& rng) {
  Require(n >= 1, ErrorCode::kInvalidArgument, "n must be at least 1");
  Require(epsilon0 > 0.0, ErrorCode::kInvalidArgument,
          "epsilon0 must be positive");
  std::normal_distribution<double> noise(0.0, GaussianStddev(n, epsilon0));
  return ClipToUnit(true_value + noise(rng));
}

inline double LaplaceScale(double sensitivity, double epsilon) {
  return sensitivity / epsilon;
}

// value + Laplace(sensitivity / epsilon). An infinite epsilon adds nothing.
template <typename Rng>
double LaplaceRelease(double value, double sensitivity, double epsilon,
                      Rng& rng) {
  Require(sensitivity > 0.0, ErrorCode::kInvalidArgument,
          "sensitivity must be positive");
  Require(epsilon > 0.0, ErrorCode::kInvalidArgument,
          "epsilon must be positive");
  const double scale = LaplaceScale(sensitivity, epsilon);
  if (scale == 0.0) return value;
  // A Laplace variate is a signed exponential variate.
  std::exponential_distribution<double> magnitude(1.0 / scale);
  const double draw = magnitude(rng);
  return internal::UniformUnit(rng) < 0.5 ? value - draw : value + draw;
}

}  // namespace pmwpub
