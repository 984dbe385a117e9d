#include "clinchlab/randomization.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace clinchlab {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const std::vector<Bid>& types_or(const std::optional<std::vector<Bid>>& true_types,
                                 const std::vector<Bid>& reported) {
  return true_types ? *true_types : reported;
}

void check_sizes(const ExactOutcome& outcome, const std::vector<Bid>& reported,
                 const std::optional<std::vector<Bid>>& true_types) {
  if (outcome.size() != reported.size() || (true_types && true_types->size() != reported.size()))
    throw Error(ErrorCode::ValidationError, "outcome and bids must have the same size");
}

void finish(RandomizedOutcome& r, const std::vector<Bid>& types) {
  const std::size_t n = r.size();
  r.expected_payment.assign(n, Rational(0));
  r.expected_utility.clear();
  for (std::size_t i = 0; i < n; ++i) {
    bool over = false;
    for (const PaymentAtom& atom : r.payment_support[i]) {
      r.expected_payment[i] += atom.payment * atom.probability;
      if (atom.probability > 0 && atom.payment > types[i].budget) over = true;
    }
    const auto k = static_cast<Eigen::Index>(i);
    r.expected_utility.push_back(over ? Utility<Rational>::minus_infinity()
                                      : Utility<Rational>::finite(types[i].valuation * r.base.allocation[k] -
                                                                  r.expected_payment[i]));
  }
}

}  // namespace

std::uint64_t CounterRng::mix(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b + 0x632be59bd9b4e019ULL)); }

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return splitmix(mix(mix(seed_, stream_), counter));
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

Rational CounterRng::uniform_exact(std::uint64_t counter) const {
  return Rational(bits(counter) >> 11) / Rational(boost::multiprecision::mpz_int(1) << 53);
}

RandomizedOutcome randomized_extraction(const ExactOutcome& outcome, const std::vector<Bid>& reported,
                                        const std::optional<std::vector<Bid>>& true_types) {
  check_sizes(outcome, reported, true_types);
  RandomizedOutcome r;
  r.base = outcome;
  for (std::size_t i = 0; i < reported.size(); ++i) {
    const Rational& pay = outcome.payment[static_cast<Eigen::Index>(i)];
    const Rational& budget = reported[i].budget;
    if (pay < 0 || pay > budget)
      throw Error(ErrorCode::PaymentExceedsBudget,
                  "bidder " + std::to_string(i) + " pays " + to_string(pay) + " outside [0, " + to_string(budget) + "]");
    if (pay == 0 || pay == budget) {
      r.payment_support.push_back({{pay, Rational(1)}});
    } else {
      const Rational q = pay / budget;
      r.payment_support.push_back({{budget, q}, {Rational(0), Rational(1) - q}});
    }
  }
  finish(r, types_or(true_types, reported));
  return r;
}

RandomizedOutcome randomized_extraction(const Outcome& outcome, const std::vector<Bid>& reported,
                                        const std::optional<std::vector<Bid>>& true_types, double slack) {
  ExactOutcome exact = to_exact(outcome);
  for (std::size_t i = 0; i < std::min(reported.size(), exact.size()); ++i) {
    Rational& pay = exact.payment[static_cast<Eigen::Index>(i)];
    const Rational& budget = reported[i].budget;
    const double excess = to_double(pay - budget);
    if (pay > budget && excess <= slack * std::max(1.0, to_double(budget))) pay = budget;
    if (pay < 0 && to_double(pay) >= -slack) pay = 0;
  }
  return randomized_extraction(exact, reported, true_types);
}

RandomizedOutcome threat_wrap(const ExactOutcome& outcome, const std::vector<Bid>& reported, const Rational& delta,
                              const std::optional<std::vector<Bid>>& true_types) {
  if (delta <= 0 || delta >= 1) throw Error(ErrorCode::InvalidDelta, "delta must lie in (0, 1)");
  check_sizes(outcome, reported, true_types);
  RandomizedOutcome r;
  r.base = outcome;
  const Rational keep = Rational(1) - delta;
  for (std::size_t i = 0; i < reported.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const Rational& pay = outcome.payment[k];
    if (outcome.allocation[k] <= 0) {
      r.payment_support.push_back({{pay, Rational(1)}});
      continue;
    }
    const Rational residual = reported[i].budget - pay;
    r.payment_support.push_back({{pay, delta * delta},
                                 {pay + residual, delta * keep},
                                 {pay - residual, keep * delta},
                                 {pay, keep * keep}});
  }
  finish(r, types_or(true_types, reported));
  return r;
}

Realization sample(const RandomizedOutcome& randomized, std::uint64_t seed, std::uint64_t draw) {
  Realization out{seed, {}};
  const CounterRng root(seed);
  for (std::size_t i = 0; i < randomized.size(); ++i) {
    const Rational u = root.split(i).uniform_exact(draw);
    Rational cumulative = 0;
    const auto& support = randomized.payment_support[i];
    Rational chosen = support.back().payment;
    for (const PaymentAtom& atom : support) {
      cumulative += atom.probability;
      if (u < cumulative) {
        chosen = atom.payment;
        break;
      }
    }
    out.payment.push_back(chosen);
  }
  return out;
}

std::vector<Rational> lottery_probabilities(const Outcome& divisible, double check_epsilon) {
  const double total = divisible.allocation.sum();
  if (!(std::abs(total - 1.0) <= 10 * check_epsilon))
    throw Error(ErrorCode::UnnormalizedAllocation, "allocations sum to " + std::to_string(total));
  std::vector<Rational> x;
  Rational sum = 0;
  for (Eigen::Index i = 0; i < divisible.allocation.size(); ++i) {
    x.push_back(exact_from_double(std::max(0.0, divisible.allocation[i])));
    sum += x.back();
  }
  for (Rational& xi : x) xi /= sum;
  return x;
}

LotteryDraw unit_lottery(const Outcome& divisible, const std::vector<Bid>& reported, std::int64_t units,
                         std::uint64_t seed, std::uint64_t draw, double check_epsilon) {
  if (units < 1) throw Error(ErrorCode::NonPositiveSupply, "the lottery needs at least one unit");
  LotteryDraw out;
  out.seed = seed;
  out.winner_probability = lottery_probabilities(divisible, check_epsilon);
  const std::size_t n = out.winner_probability.size();

  // Stream n picks the winner; streams 0..n-1 draw the extraction payments.
  const Rational u = CounterRng(seed).split(n).uniform_exact(draw);
  Rational cumulative = 0;
  out.winner = n;
  for (std::size_t i = 0; i < n; ++i) {
    cumulative += out.winner_probability[i];
    if (out.winner == n && u < cumulative) out.winner = i;
  }
  if (out.winner == n) out.winner = n - 1;

  const RandomizedOutcome paid = randomized_extraction(divisible, reported);
  const Realization payments = sample(paid, seed, draw);
  out.outcome.allocation = Vector<Rational>::Zero(static_cast<Eigen::Index>(n));
  out.outcome.allocation[static_cast<Eigen::Index>(out.winner)] = Rational(units);
  out.outcome.payment.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out.outcome.payment[static_cast<Eigen::Index>(i)] = payments.payment[i];
  out.outcome.stop_price = exact_from_double(divisible.stop_price);
  assign_utilities(out.outcome, reported);
  return out;
}

std::string format_money(const Rational& value, bool exact) {
  if (exact) return to_string(value);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", to_double(value));
  return buf;
}

void write_support_csv(std::ostream& out, const RandomizedOutcome& randomized, bool exact) {
  out << "bidder,payment,probability\n";
  for (std::size_t i = 0; i < randomized.size(); ++i)
    for (const PaymentAtom& atom : randomized.payment_support[i])
      out << i << ',' << format_money(atom.payment, exact) << ',' << format_money(atom.probability, exact) << '\n';
}

}  // namespace clinchlab
