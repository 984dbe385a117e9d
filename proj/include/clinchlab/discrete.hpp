#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "clinchlab/model.hpp"

namespace clinchlab {

/// Units demanded just above `price`: 0 when valuation <= price, otherwise
/// ceil(budget / price) - 1 (so an exact division drops one unit).
std::int64_t demand_right_limit(const Rational& budget, const Rational& price, const Rational& valuation);

enum class DiscreteStatus { Active, Exiting, Dropped };

struct DiscreteState {
  Rational price;
  std::vector<Rational> budget;
  std::vector<std::int64_t> units;
  std::int64_t supply = 0;
  std::vector<DiscreteStatus> status;
};

struct DiscreteEvent {
  enum class Kind { Clinch, Exit, FinalAllocation, Stop };
  Kind kind;
  Rational price;
  std::optional<std::size_t> bidder;
  std::int64_t units = 0;
  Rational payment;
};

std::string_view to_string(DiscreteEvent::Kind kind);

struct DiscreteRun {
  ExactOutcome outcome;
  std::vector<DiscreteEvent> events;
  DiscreteState final_state;
};

/// Ascending-price clinching over m indivisible units in exact arithmetic.
DiscreteRun run_discrete(const Profile& profile,
                         const std::optional<std::vector<Bid>>& true_types = std::nullopt);

/// event,price,bidder,units,payment
void write_discrete_events_csv(std::ostream& out, const std::vector<DiscreteEvent>& events);

}  // namespace clinchlab
