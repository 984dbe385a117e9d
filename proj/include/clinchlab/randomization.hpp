#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "clinchlab/model.hpp"

namespace clinchlab {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so draws can be taken in any order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const;
  /// Same draw as uniform(counter), as an exact dyadic rational.
  Rational uniform_exact(std::uint64_t counter) const;

  CounterRng split(std::uint64_t stream) const { return CounterRng(seed_, mix(stream_, stream)); }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);
  std::uint64_t seed_;
  std::uint64_t stream_;
};

struct PaymentAtom {
  Rational payment;
  Rational probability;
};

/// Per-bidder payment distributions (independent across bidders) over an
/// unchanged allocation.
struct RandomizedOutcome {
  ExactOutcome base;
  std::vector<std::vector<PaymentAtom>> payment_support;
  std::vector<Rational> expected_payment;
  /// v * X - E[P] against the true type, or minus infinity when a
  /// realization with positive probability exceeds the true budget.
  std::vector<Utility<Rational>> expected_utility;

  std::size_t size() const noexcept { return payment_support.size(); }
};

/// Charges the reported budget B_i with probability P_i / B_i, else 0.
RandomizedOutcome randomized_extraction(const ExactOutcome& outcome, const std::vector<Bid>& reported,
                                        const std::optional<std::vector<Bid>>& true_types = std::nullopt);
/// Float outcomes are taken at their exact binary values; payments within
/// `slack` above the budget are clamped to it.
RandomizedOutcome randomized_extraction(const Outcome& outcome, const std::vector<Bid>& reported,
                                        const std::optional<std::vector<Bid>>& true_types = std::nullopt,
                                        double slack = 1e-9);

/// For every bidder with X_i > 0, independently adds B_i - P_i with
/// probability delta and rebates B_i - P_i with probability delta.
/// Atoms are listed as (add and rebate, add only, rebate only, neither).
RandomizedOutcome threat_wrap(const ExactOutcome& outcome, const std::vector<Bid>& reported,
                              const Rational& delta,
                              const std::optional<std::vector<Bid>>& true_types = std::nullopt);

/// One realization of every bidder's payment.
struct Realization {
  std::uint64_t seed;
  std::vector<Rational> payment;
};

/// Bidder i's payment uses stream i, draw `draw`.
Realization sample(const RandomizedOutcome& randomized, std::uint64_t seed, std::uint64_t draw = 0);

struct LotteryDraw {
  std::uint64_t seed;
  std::size_t winner;
  std::vector<Rational> winner_probability;
  /// All m units to the winner; payments drawn from the extraction layer.
  ExactOutcome outcome;
};

/// Exact winner probabilities x_i / sum x. Throws UnnormalizedAllocation
/// when sum x deviates from 1 by more than 10 * check_epsilon.
std::vector<Rational> lottery_probabilities(const Outcome& divisible, double check_epsilon = 1e-7);

/// Draws a winner with probability x_i and hands it all `units` units.
/// `divisible` is the outcome on the profile with valuations scaled by m.
LotteryDraw unit_lottery(const Outcome& divisible, const std::vector<Bid>& reported, std::int64_t units,
                         std::uint64_t seed, std::uint64_t draw = 0, double check_epsilon = 1e-7);

/// bidder,payment,probability. Payments print as rationals when `exact`,
/// else as doubles.
void write_support_csv(std::ostream& out, const RandomizedOutcome& randomized, bool exact = true);

/// %.17g of the value, or its exact rational text.
std::string format_money(const Rational& value, bool exact);

}  // namespace clinchlab
