#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "clinchlab/model.hpp"

namespace clinchlab {

enum class BidderStatus { Active, Exiting, Dropped };

/// Snapshot of the adaptive clinching process for one divisible unit.
///
/// `time` is the process clock: it advances with the price while the price
/// rises and with the drained budget while the price is held at an exiting
/// bidder's valuation.
struct AuctionState {
  double price = 0.0;
  double time = 0.0;
  double supply = 1.0;
  Eigen::VectorXd budget;
  Eigen::VectorXd allocation;
  Eigen::VectorXd payment;
  std::vector<BidderStatus> status;
  std::vector<bool> clinching;

  std::size_t size() const noexcept { return status.size(); }
  int clinch_count() const;
  bool has_exiting() const;
  /// Largest effective budget among Active bidders (0 when none).
  double max_active_budget() const;
  /// D_{-i} = sum_{j != i} b_j / p. Requires price > 0.
  double demand_excluding(std::size_t bidder) const;
  /// sum over Active bidders of b_i / p. Requires price > 0.
  double active_demand() const;
};

enum class EventKind {
  ClinchStart,
  JoinClinch,
  ExitTransition,
  DrainSegment,
  ClinchSegment,
  OneShotAllocation,
  Stop,
};

std::string_view to_string(EventKind kind);

struct Event {
  EventKind kind;
  double price;
  std::optional<std::size_t> bidder;
  AuctionState state;
};

struct Trajectory {
  AuctionState initial;
  std::vector<Event> events;

  double stop_price() const;
  double stop_time() const;
};

struct DivisibleRun {
  Outcome outcome;
  Trajectory trajectory;
};

/// Runs the adaptive clinching auction on a validated divisible profile.
/// Utilities are computed against `true_types` when given, else against the
/// reported bids.
DivisibleRun run_divisible(const Profile& profile,
                           const std::optional<std::vector<Bid>>& true_types = std::nullopt,
                           const NumericPolicy& policy = {});

struct ClinchSegmentEnd {
  double supply;
  double budget;
  double allocation_per_clincher;
  double payment_per_clincher;
};

/// Integrates dS/dp = -cS/p, db/dp = -S from p0 to p1 in closed form.
ClinchSegmentEnd clinch_segment_closed_form(double supply0, double budget0, double price0,
                                            double price1, int clinchers);

/// The event that ends the current segment. For price segments `price` is the
/// event price and `amount` is zero; for drain segments (some bidder Exiting)
/// the price is held and `amount` is the budget drained from the exiting
/// bidder until the event.
struct EventCandidate {
  EventKind kind;
  double price;
  double amount;
  std::optional<std::size_t> bidder;
};

EventCandidate next_event(const Profile& profile, const AuctionState& state,
                          const NumericPolicy& policy = {});

/// Utility accrued by `bidder` on clinches and one-shot allocations with
/// price in (price_low, price_high], valued at `true_valuation`.
double utility_between(const Trajectory& trajectory, std::size_t bidder, double price_low,
                       double price_high, double true_valuation);

/// event_kind,price,S,b_0,x_0,P_0,b_1,...
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace clinchlab
