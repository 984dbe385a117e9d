#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clinchlab/divisible.hpp"
#include "clinchlab/model.hpp"

namespace clinchlab {

enum class Property {
  VoluntaryParticipation,
  NoPositiveTransfers,
  ParetoOptimality,
  BudgetFeasibility,
  SupplyInvariant,
  ClinchingInvariant,
  BudgetInvariant,
  ClinchingSet,
  PriceOrder,
  BudgetDecline,
  Conservation,
  FullExtraction,
  PartialPayers,
};

std::string_view to_string(Property property);

struct Violation {
  Property property;
  std::optional<std::size_t> bidder;
  std::string detail;
};

/// VP for truthful bidders, NPT, PO and budget feasibility. Empty when all
/// hold within `epsilon`.
std::vector<Violation> check_outcome(const Profile& profile, const std::vector<Bid>& true_types,
                                     const Outcome& outcome, double epsilon = 1e-7);
/// Exact variant for discrete outcomes: PO requires all m units sold and
/// v_i > B_j - P_j whenever X_i > 0 and v_j > v_i.
std::vector<Violation> check_outcome(const Profile& profile, const std::vector<Bid>& true_types,
                                     const ExactOutcome& outcome);

/// Snapshot invariants (supply, clinching, budget, clinching set = argmax),
/// price order, b_max decline, conservation and the terminal full-extraction
/// and single-partial-payer properties.
///
/// Snapshot invariants are evaluated once per settled point, i.e. on the last
/// event sharing a (price, time) pair, and only before the stop. A bidder
/// whose competitors hold no budget at all is exempt from the supply
/// invariant: clinching never starts for a lone bidder.
std::vector<Violation> check_trajectory(const Profile& profile, const Trajectory& trajectory,
                                        double epsilon = 1e-7);

struct Witness {
  std::size_t first;
  std::size_t second;
  double gap;
};

struct SweepReport {
  enum class Kind { BudgetMonotonicity, ValuationIC };
  enum class Verdict { Holds, Violated };

  Kind kind;
  std::string instance;
  std::size_t bidder;
  std::vector<Rational> grid;
  std::vector<Utility<double>> utility;
  /// Discrete sweeps: the exact utilities behind `utility`.
  std::vector<Rational> exact_utility;
  Verdict verdict = Verdict::Holds;
  /// Budget sweeps: grid indices (lower budget, higher budget) with
  /// u(first) > u(second) + tolerance. Valuation sweeps: first is the
  /// misreport beating the truth, second is unused.
  std::optional<Witness> witness;
  /// Valuation sweeps: utility of the truthful report.
  std::optional<Utility<double>> truthful_utility;
  /// Largest dip not exceeding the tolerance.
  double largest_dip = 0.0;
  double tolerance;
  /// Trajectory and outcome violations met along the sweep (divisible only).
  std::vector<Violation> invariant_violations;
  std::size_t runs = 0;
};

struct SweepOptions {
  double tolerance = 1e-7;
  bool check_invariants = true;
  NumericPolicy policy = {};
};

/// Reruns the engine with bidder's budget set to each grid point, others
/// fixed, and tests u(B) for monotonicity. The true type is the reported
/// valuation with budget max(grid). Discrete profiles compare exactly.
SweepReport monotonicity_sweep(const Profile& profile, std::size_t bidder, const std::vector<Rational>& grid,
                               const SweepOptions& options = {});

/// Reruns the engine with each reported valuation and tests that reporting
/// `truth.valuation` (with the profile's reported budget) is best.
SweepReport ic_valuation_sweep(const Profile& profile, std::size_t bidder, const std::vector<Rational>& grid,
                               const Bid& truth, const SweepOptions& options = {});

/// `count` evenly spaced points k * top / (count - 1), k = 0..count-1.
std::vector<Rational> even_grid(const Rational& top, std::size_t count);

void write_sweep_csv(std::ostream& out, const SweepReport& report);
std::string describe(const SweepReport& report);

struct RunTimes {
  /// Process times of the first ClinchStart, the bidder's entry into the
  /// clinching set, and the stop; prices alongside.
  std::optional<double> y, q;
  double f = 0.0;
  std::optional<double> y_price, q_price;
  double f_price = 0.0;
};

struct StructureReport {
  /// Set to PreconditionNotMet when the canonical case does not hold.
  std::optional<ErrorCode> precondition;
  std::string precondition_detail;
  RunTimes low, high;
  bool ordering_holds = true;
  bool coupling_holds = true;
  std::string failure;
  double low_utility = 0.0;
  double high_utility = 0.0;
  bool utility_monotone = true;
  DivisibleRun low_run, high_run;
};

RunTimes run_times(const Trajectory& trajectory, std::size_t bidder);

/// Price at process time t, read off the event snapshots.
double price_at_time(const Trajectory& trajectory, double t);

/// Runs Low (bidder's budget `low_budget`) and High (`high_budget`) and
/// checks y0 <= y1 <= q1 <= q0 < min(f0, f1), the price coupling
/// p0(t) = p1(t) for t <= min(f0, f1), equal exit prices before min(f0, f1)
/// and u0 <= u1. Utilities use the true type (v, high_budget).
///
/// Canonical case: both runs clinch, the bidder enters the clinching set of
/// Low before Low stops, u0 > 0 and p(q0) < v. Otherwise only u0 <= u1 is
/// asserted.
StructureReport structure_times(const Profile& profile, std::size_t bidder, const Rational& low_budget,
                                const Rational& high_budget, double tolerance = 1e-9,
                                const NumericPolicy& policy = {});

struct EngineComparison {
  double allocation_deviation;
  double payment_deviation;
  double max_deviation() const { return std::max(allocation_deviation, payment_deviation); }
};

/// Max over bidders of |X| and |P| differences between the event-driven
/// engine and the fixed-step integrator.
EngineComparison compare_engines(const Profile& profile, double dt, const NumericPolicy& policy = {});

struct RandomProfileOptions {
  std::size_t min_bidders = 1;
  std::size_t max_bidders = 5;
  /// Values and budgets are uniform on {0, 1/d, ..., top}.
  Rational top = 10;
  std::int64_t denominator = 2;
  /// Draw valuations and budgets from [1/d, top] instead of [0, top].
  bool positive = false;
};

/// Seeded random divisible profile. Ties occur naturally on the grid.
Profile random_profile(std::uint64_t seed, std::uint64_t index, const RandomProfileOptions& options = {});

/// Expected utility under Randomized Extraction of a bidder with true type
/// `truth` reporting `reported_budget` (all else as in the profile).
Utility<Rational> extraction_utility(const Profile& profile, std::size_t bidder, const Bid& truth,
                                     const Rational& reported_budget, const NumericPolicy& policy = {});

}  // namespace clinchlab
