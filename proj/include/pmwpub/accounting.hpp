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

// zCDP accounting. A run with parameter epsilon_tilde is rho-zCDP with
// rho = epsilon_tilde^2 / 2, split evenly across 2T primitive releases.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "pmwpub/status.hpp"

namespace pmwpub {

// Exact nonnegative rational, always in lowest terms.
class Fraction {
 public:
  constexpr Fraction() = default;
  Fraction(std::int64_t numerator, std::int64_t denominator)
      : num_(numerator), den_(denominator) {
    Require(den_ > 0, ErrorCode::kInvalidArgument,
            "fraction denominator must be positive");
    Reduce();
  }

  std::int64_t numerator() const { return num_; }
  std::int64_t denominator() const { return den_; }
  double ToDouble() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  Fraction operator+(const Fraction& o) const {
    const std::int64_t g = std::gcd(den_, o.den_);
    return Fraction(num_ * (o.den_ / g) + o.num_ * (den_ / g),
                    den_ / g * o.den_);
  }
  Fraction& operator+=(const Fraction& o) { return *this = *this + o; }

  bool operator==(const Fraction&) const = default;
  bool operator<=(const Fraction& o) const {
    return static_cast<__int128>(num_) * o.den_ <=
           static_cast<__int128>(o.num_) * den_;
  }

 private:
  void Reduce() {
    const std::int64_t g = std::gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// epsilon0 = epsilon_tilde / sqrt(2T).
inline double PerRoundBudget(double epsilon_tilde, int rounds) {
  Require(epsilon_tilde > 0.0, ErrorCode::kConfig,
          "epsilon_tilde must be positive");
  Require(rounds >= 1, ErrorCode::kConfig, "T must be at least 1");
  return epsilon_tilde / std::sqrt(2.0 * rounds);
}

// Loose conversion rho + sqrt(2 log(1/delta)) * epsilon_tilde.
inline double ClosedFormApproxDp(double epsilon_tilde, double delta) {
  return 0.5 * epsilon_tilde * epsilon_tilde +
         std::sqrt(2.0 * std::log(1.0 / delta)) * epsilon_tilde;
}

// Inverse of ClosedFormApproxDp in epsilon_tilde.
inline double ClosedFormInverse(double epsilon, double delta) {
  const double c = std::sqrt(2.0 * std::log(1.0 / delta));
  return -c + std::sqrt(c * c + 2.0 * epsilon);
}

namespace internal {

// The objective of the zCDP-to-DP conversion at alpha = 1 + exp(u):
//   rho * alpha + log(1 / (alpha * delta)) / (alpha - 1) + log(1 - 1/alpha).
inline double ConversionObjective(double u, double rho, double log_delta) {
  const double alpha_minus_one = std::exp(u);
  const double log_alpha = std::log1p(alpha_minus_one);
  return rho * (1.0 + alpha_minus_one) +
         (-log_alpha - log_delta) / alpha_minus_one + (u - log_alpha);
}

}  // namespace internal

// epsilon(delta) = inf_{alpha > 1} of the objective above, floored at 0.
// A coarse scan over log(alpha - 1) brackets the minimum, then Brent's method
// refines it.
inline double ZcdpToApproxDp(double epsilon_tilde, double delta) {
  Require(delta > 0.0 && delta < 1.0, ErrorCode::kConfig,
          "delta must lie in (0, 1)");
  Require(epsilon_tilde >= 0.0, ErrorCode::kConfig,
          "epsilon_tilde must be nonnegative");
  if (epsilon_tilde == 0.0) return 0.0;
  const double rho = 0.5 * epsilon_tilde * epsilon_tilde;
  const double log_delta = std::log(delta);
  auto objective = [&](double u) {
    return internal::ConversionObjective(u, rho, log_delta);
  };
  constexpr double kLow = -25.0;
  constexpr double kHigh = 70.0;
  constexpr int kSteps = 4000;
  constexpr double kStep = (kHigh - kLow) / kSteps;
  double best_u = kLow;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kSteps; ++i) {
    const double u = kLow + kStep * i;
    const double v = objective(u);
    if (v < best) {
      best = v;
      best_u = u;
    }
  }
  const auto [u_min, v_min] = boost::math::tools::brent_find_minima(
      objective, best_u - kStep, best_u + kStep, 50);
  (void)u_min;
  return std::max(0.0, std::min(best, v_min));
}

// The epsilon_tilde whose tight conversion equals `epsilon`, by bisection.
inline double ApproxDpToZcdp(double epsilon, double delta) {
  Require(epsilon > 0.0, ErrorCode::kConfig, "epsilon must be positive");
  Require(delta > 0.0 && delta < 1.0, ErrorCode::kConfig,
          "delta must lie in (0, 1)");
  // The tight conversion never exceeds the closed form, so the closed-form
  // inverse is a lower bracket.
  double lo = ClosedFormInverse(epsilon, delta);
  double hi = 2.0 * lo;
  while (ZcdpToApproxDp(hi, delta) < epsilon) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (ZcdpToApproxDp(mid, delta) < epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Resolved budget of one run.
struct PrivacyBudget {
  double epsilon_tilde = 0.0;
  int rounds = 0;
  double epsilon0 = 0.0;
  double delta = 0.0;

  double rho() const { return 0.5 * epsilon_tilde * epsilon_tilde; }
  double round_rho() const { return 0.5 * epsilon0 * epsilon0; }

  static PrivacyBudget FromZcdp(double epsilon_tilde, int rounds,
                                double delta) {
    Require(delta > 0.0 && delta < 1.0, ErrorCode::kConfig,
            "delta must lie in (0, 1)");
    return PrivacyBudget{epsilon_tilde, rounds,
                         PerRoundBudget(epsilon_tilde, rounds), delta};
  }

  static PrivacyBudget FromApproxDp(double epsilon, int rounds, double delta) {
    return FromZcdp(ApproxDpToZcdp(epsilon, delta), rounds, delta);
  }
};

struct Release {
  std::string mechanism;
  // Iteration for algorithm releases; 0 for the mixture-error probe.
  int round = 0;
  // Pure-DP parameter of the primitive (epsilon0 or the probe epsilon).
  double epsilon = 0.0;
  double rho = 0.0;
  // Exact fraction of the run's rho this release consumed; 0 for probes.
  Fraction share;
};

// Records every primitive release and refuses any that would exceed the
// budget: 2T round releases of 1/(2T) of rho each, plus an optional pure-DP
// probe allowance.
class PrivacyLedger {
 public:
  PrivacyLedger() = default;
  explicit PrivacyLedger(PrivacyBudget budget, double probe_epsilon = 0.0)
      : budget_(budget), probe_allowance_(probe_epsilon) {
    Require(probe_epsilon >= 0.0, ErrorCode::kConfig,
            "probe epsilon must be nonnegative");
  }

  // A ledger holding only a probe allowance.
  static PrivacyLedger ProbeOnly(double probe_epsilon) {
    return PrivacyLedger(PrivacyBudget{}, probe_epsilon);
  }

  void ChargeRound(const std::string& mechanism, int round) {
    Require(budget_.rounds >= 1, ErrorCode::kBudgetExceeded,
            "ledger has no per-round budget");
    const Fraction share(1, 2 * static_cast<std::int64_t>(budget_.rounds));
    Require(run_share_ + share <= Fraction(1, 1), ErrorCode::kBudgetExceeded,
            "release would exceed the run's zCDP budget");
    run_share_ += share;
    releases_.push_back(
        Release{mechanism, round, budget_.epsilon0, budget_.round_rho(), share});
  }

  // Pure epsilon-DP release, accounted as epsilon^2 / 2 zCDP.
  void ChargeProbe(double epsilon) {
    Require(epsilon > 0.0, ErrorCode::kInvalidArgument,
            "probe epsilon must be positive");
    Require(probe_spent_ + epsilon <= probe_allowance_ * (1.0 + 1e-12),
            ErrorCode::kBudgetExceeded,
            "probe epsilon " + std::to_string(epsilon) +
                " exceeds the remaining probe allowance " +
                std::to_string(probe_allowance_ - probe_spent_));
    probe_spent_ += epsilon;
    releases_.push_back(
        Release{"laplace_probe", 0, epsilon, 0.5 * epsilon * epsilon, {}});
  }

  const PrivacyBudget& budget() const { return budget_; }
  const std::vector<Release>& releases() const { return releases_; }
  const Fraction& run_share_spent() const { return run_share_; }
  double probe_allowance() const { return probe_allowance_; }

  // rho actually spent so far.
  double rho_spent() const {
    double total = 0.0;
    for (const Release& r : releases_) total += r.rho;
    return total;
  }

  // rho guaranteed by the configuration: the full run plus the probe.
  double rho_capacity() const {
    return budget_.rho() + 0.5 * probe_allowance_ * probe_allowance_;
  }

  // (epsilon, delta)-DP implied by the configured capacity.
  double EpsilonReported() const {
    if (budget_.delta <= 0.0) return 0.0;
    return ZcdpToApproxDp(std::sqrt(2.0 * rho_capacity()), budget_.delta);
  }

 private:
  PrivacyBudget budget_;
  double probe_allowance_ = 0.0;
  double probe_spent_ = 0.0;
  Fraction run_share_;
  std::vector<Release> releases_;
};

}  // namespace pmwpub
