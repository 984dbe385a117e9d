#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "clinchlab/discrete.hpp"
#include "clinchlab/property_lab.hpp"
#include "clinchlab/randomization.hpp"
#include "support.hpp"

using namespace clinchlab;
using clinchlab::testing::discrete;
using clinchlab::testing::q;

namespace {

using Kind = DiscreteEvent::Kind;

struct Step {
  Kind kind;
  Rational price;
  std::optional<std::size_t> bidder;
  std::int64_t units;
  Rational payment;

  friend bool operator==(const Step&, const Step&) = default;
};

std::int64_t floor_div(const Rational& a, const Rational& b) {
  const Rational r = a / b;
  return (boost::multiprecision::numerator(r) / boost::multiprecision::denominator(r)).convert_to<std::int64_t>();
}

/// Walks every price a / d (d <= max_den) up to the top valuation and applies
/// the clinching rule at each one. Knows nothing about breakpoints, so it
/// agrees with the engine only when every event price lies on that grid.
std::vector<Step> scan_oracle(const Profile& p, std::int64_t max_den) {
  Rational top = 0;
  for (const Bid& b : p.bids) top = std::max(top, b.valuation);
  std::set<Rational> grid;
  for (std::int64_t d = 1; d <= max_den; ++d)
    for (std::int64_t a = 1; Rational(a, d) <= top; ++a) grid.insert(Rational(a, d));

  const std::size_t n = p.size();
  std::vector<Rational> b;
  for (const Bid& bid : p.bids) b.push_back(bid.budget);
  std::int64_t S = p.supply.units();
  std::vector<Step> log;

  const auto demand = [&](std::size_t i, const Rational& price) -> std::int64_t {
    if (p.bids[i].valuation <= price || b[i] <= 0) return 0;
    std::int64_t f = floor_div(b[i], price);
    if (Rational(f) * price == b[i]) --f;
    return f;
  };
  const auto total = [&](const Rational& price) {
    std::int64_t t = 0;
    for (std::size_t i = 0; i < n; ++i) t += demand(i, price);
    return t;
  };
  const auto take = [&](std::size_t i, std::int64_t u, const Rational& price, Kind kind) {
    b[i] -= price * u;
    S -= u;
    log.push_back({kind, price, i, u, price * u});
  };
  const auto finish = [&](const Rational& price) {
    for (std::size_t i : p.order) {
      const std::int64_t d = std::min(demand(i, price), S);
      if (d > 0) take(i, d, price, Kind::FinalAllocation);
    }
    for (const bool exiting : {false, true})
      for (std::size_t i : p.order) {
        if (S == 0) break;
        const bool at_value = p.bids[i].valuation == price;
        if (b[i] <= 0 || at_value != exiting || (!exiting && p.bids[i].valuation < price)) continue;
        const std::int64_t u = std::min(S, floor_div(b[i], price));
        if (u > 0) take(i, u, price, Kind::FinalAllocation);
      }
    log.push_back({Kind::Stop, price, std::nullopt, 0, Rational(0)});
  };

  for (const Rational& price : grid) {
    for (std::size_t i : p.order)
      if (p.bids[i].valuation == price && b[i] > 0) log.push_back({Kind::Exit, price, i, 0, Rational(0)});
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i : p.order) {
        if (S == 0 || total(price) <= S) {
          finish(price);
          return log;
        }
        const std::int64_t gain = S - (total(price) - demand(i, price));
        if (demand(i, price) > 0 && gain > 0) {
          take(i, gain, price, Kind::Clinch);
          changed = true;
        }
      }
    }
  }
  return log;
}

std::vector<Step> steps(const DiscreteRun& run) {
  std::vector<Step> out;
  for (const DiscreteEvent& e : run.events) out.push_back({e.kind, e.price, e.bidder, e.units, e.payment});
  return out;
}

}  // namespace

TEST_CASE("right-limit demand") {
  CHECK(demand_right_limit(q("5"), q("2"), q("3")) == 2);
  CHECK(demand_right_limit(q("4"), q("2"), q("3")) == 1);
  CHECK(demand_right_limit(q("4"), q("3"), q("3")) == 0);
  CHECK(demand_right_limit(q("13/3"), q("13/6"), q("3")) == 1);
  CHECK(demand_right_limit(q("0"), q("1"), q("3")) == 0);
  CHECK_THROWS_AS(demand_right_limit(q("4"), q("0"), q("3")), Error);
}

TEST_CASE("truthful budgets: two clinches at price 2") {
  const Profile p = discrete(4, {{"3", "6"}, {"3", "5"}, {"3", "4"}});
  const DiscreteRun run = run_discrete(p);
  std::vector<Step> clinches;
  for (const Step& s : steps(run))
    if (s.kind == Kind::Clinch) clinches.push_back(s);
  REQUIRE(clinches.size() == 2);
  CHECK(clinches[0] == Step{Kind::Clinch, q("2"), 0, 1, q("2")});
  CHECK(clinches[1] == Step{Kind::Clinch, q("2"), 1, 1, q("2")});
  CHECK(run.outcome.utility[2].value() == 0);
  CHECK(run.outcome.allocation.sum() == 4);
  CHECK(check_outcome(p, p.bids, run.outcome).empty());
}

TEST_CASE("under-reported budget gains a unit at 17/6") {
  const Profile p = discrete(4, {{"3", "6"}, {"3", "5"}, {"3", "3"}});
  const std::vector<Bid> truth{{q("3"), q("6")}, {q("3"), q("5")}, {q("3"), q("4")}};
  const DiscreteRun run = run_discrete(p, truth);
  const std::vector<Step> expected{
      {Kind::Clinch, q("5/3"), 0, 1, q("5/3")},
      {Kind::Clinch, q("13/6"), 1, 1, q("13/6")},
      {Kind::FinalAllocation, q("17/6"), 0, 1, q("17/6")},
      {Kind::FinalAllocation, q("17/6"), 2, 1, q("17/6")},
      {Kind::Stop, q("17/6"), std::nullopt, 0, q("0")},
  };
  CHECK(steps(run) == expected);
  CHECK(run.outcome.allocation[2] == 1);
  CHECK(run.outcome.payment[2] == q("17/6"));
  CHECK(run.outcome.utility[2].value() == q("1/6"));
}

TEST_CASE("engine matches the price-scan oracle") {
  for (const Profile& p : {discrete(4, {{"3", "6"}, {"3", "5"}, {"3", "4"}}),
                           discrete(4, {{"3", "6"}, {"3", "5"}, {"3", "3"}})}) {
    CHECK(steps(run_discrete(p)) == scan_oracle(p, 12));
  }

  // Random small instances whose event prices have denominators <= 24.
  std::size_t compared = 0;
  for (std::uint64_t k = 0; k < 400 && compared < 60; ++k) {
    const CounterRng rng(5, k);
    Profile p;
    const std::size_t n = 2 + rng.bits(0) % 3;
    for (std::size_t i = 0; i < n; ++i)
      p.bids.push_back({Rational(1 + static_cast<long>(rng.bits(1 + 2 * i) % 4)),
                        Rational(1 + static_cast<long>(rng.bits(2 + 2 * i) % 8))});
    p.supply = Supply::discrete(1 + static_cast<long>(rng.bits(20) % 4));
    p = validate_profile(p);
    const DiscreteRun run = run_discrete(p);
    const bool on_grid = std::all_of(run.events.begin(), run.events.end(), [](const DiscreteEvent& e) {
      return boost::multiprecision::denominator(e.price) <= 24;
    });
    if (!on_grid) continue;
    ++compared;
    CAPTURE(k);
    CHECK(steps(run) == scan_oracle(p, 24));
    CHECK(check_outcome(p, p.bids, run.outcome).empty());
  }
  CHECK(compared >= 40);
}

TEST_CASE("random instances: budgets, conservation and discrete PO") {
  for (std::uint64_t k = 0; k < 200; ++k) {
    const CounterRng rng(8, k);
    Profile p;
    const std::size_t n = 1 + rng.bits(0) % 4;
    for (std::size_t i = 0; i < n; ++i)
      p.bids.push_back({Rational(static_cast<long>(rng.bits(1 + 2 * i) % 9), 2),
                        Rational(static_cast<long>(rng.bits(2 + 2 * i) % 13), 3)});
    p.supply = Supply::discrete(1 + static_cast<long>(rng.bits(30) % 6));
    p = validate_profile(p);
    const DiscreteRun run = run_discrete(p);
    CAPTURE(k);
    CHECK(run.final_state.supply + run.outcome.allocation.sum() == p.supply.units());
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      CHECK(run.outcome.payment[idx] <= p.bids[i].budget);
      CHECK(run.outcome.payment[idx] >= 0);
      CHECK_FALSE(run.outcome.utility[i] < Utility<Rational>::finite(Rational(0)));
    }
    const bool live = std::any_of(p.bids.begin(), p.bids.end(),
                                  [](const Bid& b) { return b.valuation > 0 && b.budget > 0; });
    if (live) CHECK(check_outcome(p, p.bids, run.outcome).empty());
  }
}

TEST_CASE("events csv and errors") {
  const Profile p = discrete(4, {{"3", "6"}, {"3", "5"}, {"3", "3"}});
  std::ostringstream out;
  write_discrete_events_csv(out, run_discrete(p).events);
  CHECK(out.str().rfind("event,price,bidder,units,payment\n", 0) == 0);
  CHECK(out.str().find("FinalAllocation,17/6,2,1,17/6") != std::string::npos);

  Profile d = p;
  d.supply = Supply::divisible();
  CHECK_THROWS_AS(run_discrete(d), Error);
  CHECK_THROWS_AS(run_discrete(p, std::vector<Bid>{}), Error);
}
