#include "clinchlab/property_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "clinchlab/discrete.hpp"
#include "clinchlab/randomization.hpp"
#include "clinchlab/reference.hpp"

namespace clinchlab {

std::string_view to_string(Property property) {
  switch (property) {
    case Property::VoluntaryParticipation: return "VP";
    case Property::NoPositiveTransfers: return "NPT";
    case Property::ParetoOptimality: return "PO";
    case Property::BudgetFeasibility: return "BudgetFeasibility";
    case Property::SupplyInvariant: return "SupplyInvariant";
    case Property::ClinchingInvariant: return "ClinchingInvariant";
    case Property::BudgetInvariant: return "BudgetInvariant";
    case Property::ClinchingSet: return "ClinchingSet";
    case Property::PriceOrder: return "PriceOrder";
    case Property::BudgetDecline: return "BudgetDecline";
    case Property::Conservation: return "Conservation";
    case Property::FullExtraction: return "FullExtraction";
    case Property::PartialPayers: return "PartialPayers";
  }
  return "Unknown";
}

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

bool truthful(const Bid& reported, const Bid& truth) {
  return reported.valuation == truth.valuation && reported.budget <= truth.budget;
}

void require_types(const Profile& profile, const std::vector<Bid>& true_types, std::size_t outcome_size) {
  if (true_types.size() != profile.size() || outcome_size != profile.size())
    throw Error(ErrorCode::ValidationError, "profile, true types and outcome must have the same size");
}

}  // namespace

std::vector<Violation> check_outcome(const Profile& profile, const std::vector<Bid>& true_types,
                                     const Outcome& outcome, double epsilon) {
  require_types(profile, true_types, outcome.size());
  std::vector<Violation> out;
  const std::size_t n = profile.size();
  std::vector<double> v(n), budget(n), x(n), pay(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = to_double(profile.bids[i].valuation);
    budget[i] = to_double(profile.bids[i].budget);
    x[i] = outcome.allocation[static_cast<Eigen::Index>(i)];
    pay[i] = outcome.payment[static_cast<Eigen::Index>(i)];
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double beta = to_double(true_types[i].budget);
    const Utility<double> u = realized_utility(to_double(true_types[i].valuation), beta, x[i], pay[i],
                                               epsilon * std::max(1.0, beta));
    if (pay[i] < -epsilon) out.push_back({Property::NoPositiveTransfers, i, "payment " + fmt(pay[i])});
    if (pay[i] > budget[i] + epsilon * std::max(1.0, budget[i]) || u.is_minus_infinity())
      out.push_back({Property::BudgetFeasibility, i, "payment " + fmt(pay[i]) + " above budget"});
    if (truthful(profile.bids[i], true_types[i]) && !u.is_minus_infinity() && u.value() < -epsilon)
      out.push_back({Property::VoluntaryParticipation, i, "utility " + fmt(u.value())});
  }

  const double sold = outcome.allocation.sum();
  if (std::abs(sold - 1.0) > epsilon)
    out.push_back({Property::ParetoOptimality, std::nullopt, "total allocation " + fmt(sold)});
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] <= epsilon) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (v[j] > v[i] && pay[j] < budget[j] - epsilon * std::max(1.0, budget[j]))
        out.push_back({Property::ParetoOptimality, j,
                       "outbids bidder " + std::to_string(i) + " but keeps budget " + fmt(budget[j] - pay[j])});
    }
  }
  return out;
}

std::vector<Violation> check_outcome(const Profile& profile, const std::vector<Bid>& true_types,
                                     const ExactOutcome& outcome) {
  require_types(profile, true_types, outcome.size());
  std::vector<Violation> out;
  const std::size_t n = profile.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const Utility<Rational> u = realized_utility(true_types[i].valuation, true_types[i].budget,
                                                 outcome.allocation[k], outcome.payment[k]);
    if (outcome.payment[k] < 0)
      out.push_back({Property::NoPositiveTransfers, i, "payment " + to_string(outcome.payment[k])});
    if (outcome.payment[k] > profile.bids[i].budget || u.is_minus_infinity())
      out.push_back({Property::BudgetFeasibility, i, "payment " + to_string(outcome.payment[k]) + " above budget"});
    if (truthful(profile.bids[i], true_types[i]) && !u.is_minus_infinity() && u.value() < 0)
      out.push_back({Property::VoluntaryParticipation, i, "utility " + to_string(u.value())});
  }
  const Rational sold = outcome.allocation.sum();
  if (sold != Rational(profile.supply.units()))
    out.push_back({Property::ParetoOptimality, std::nullopt, "total allocation " + to_string(sold)});
  for (std::size_t i = 0; i < n; ++i) {
    if (outcome.allocation[static_cast<Eigen::Index>(i)] <= 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      // A unit moved from i to j would cost j at least v_i.
      const Rational left = profile.bids[j].budget - outcome.payment[static_cast<Eigen::Index>(j)];
      if (profile.bids[j].valuation > profile.bids[i].valuation && left >= profile.bids[i].valuation)
        out.push_back({Property::ParetoOptimality, j,
                       "outbids bidder " + std::to_string(i) + " and keeps budget " + to_string(left)});
    }
  }
  return out;
}

std::vector<Violation> check_trajectory(const Profile& profile, const Trajectory& trajectory, double epsilon) {
  std::vector<Violation> out;
  const std::size_t n = profile.size();
  std::vector<double> v(n), initial(n);
  double total_budget = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = to_double(profile.bids[i].valuation);
    initial[i] = to_double(profile.bids[i].budget);
    total_budget += initial[i];
  }
  const double tol = epsilon * std::max(1.0, total_budget);
  const auto& events = trajectory.events;
  const auto at = [](const Eigen::VectorXd& vec, std::size_t i) { return vec[static_cast<Eigen::Index>(i)]; };

  // Every snapshot: order and conservation.
  const AuctionState* prev = &trajectory.initial;
  for (std::size_t e = 0; e < events.size(); ++e) {
    const AuctionState& s = events[e].state;
    if (s.price < prev->price || s.time < prev->time)
      out.push_back({Property::PriceOrder, std::nullopt, "event " + std::to_string(e) + " goes back in price"});
    const double mass = s.allocation.sum() + s.supply;
    if (std::abs(mass - 1.0) > epsilon)
      out.push_back({Property::Conservation, std::nullopt,
                     "event " + std::to_string(e) + ": sum x + S = " + fmt(mass)});
    prev = &s;
  }

  // Settled snapshots before the stop.
  std::vector<const AuctionState*> settled;
  bool seen_clinch = false;
  std::vector<bool> after_clinch;
  for (std::size_t e = 0; e < events.size(); ++e) {
    const EventKind kind = events[e].kind;
    if (kind == EventKind::OneShotAllocation || kind == EventKind::Stop) break;
    if (kind == EventKind::ClinchStart) seen_clinch = true;
    const bool last_of_group = e + 1 == events.size() || events[e + 1].state.price != events[e].state.price ||
                               events[e + 1].state.time != events[e].state.time;
    if (!last_of_group) continue;
    const bool stops_here = e + 1 < events.size() && (events[e + 1].kind == EventKind::OneShotAllocation ||
                                                      events[e + 1].kind == EventKind::Stop);
    if (stops_here) break;
    settled.push_back(&events[e].state);
    after_clinch.push_back(seen_clinch);
  }

  for (std::size_t k = 0; k < settled.size(); ++k) {
    const AuctionState& s = *settled[k];
    const std::string where = "p=" + fmt(s.price) + " t=" + fmt(s.time);
    if (s.price <= 0.0) continue;
    const double total = s.budget.sum();
    const double held = s.price * s.supply;
    double b_max = 0.0;
    bool any_clinching = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (s.status[i] == BidderStatus::Active) b_max = std::max(b_max, at(s.budget, i));
      any_clinching = any_clinching || s.clinching[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double rest = total - at(s.budget, i);
      if (rest > 0.0 && held > rest + tol)
        out.push_back({Property::SupplyInvariant, i, where + ": S*p " + fmt(held) + " > " + fmt(rest)});
      const bool active = s.status[i] == BidderStatus::Active;
      const bool tight = std::abs(held - rest) <= tol;
      if (s.clinching[i] != (active && tight))
        out.push_back({Property::ClinchingInvariant, i,
                       where + (s.clinching[i] ? ": clinching off the boundary" : ": on the boundary, not clinching")});
      if (active && std::abs(at(s.budget, i) - (initial[i] - at(s.payment, i))) > tol)
        out.push_back({Property::BudgetInvariant, i, where + ": b != B - P"});
      if (s.status[i] == BidderStatus::Dropped && at(s.budget, i) > tol)
        out.push_back({Property::BudgetInvariant, i, where + ": dropped with budget " + fmt(at(s.budget, i))});
      if (any_clinching && active && s.clinching[i] != (at(s.budget, i) >= b_max - tol))
        out.push_back({Property::ClinchingSet, i, where + ": clinching set differs from argmax budget"});
    }
  }

  for (std::size_t k = 1; k < settled.size(); ++k) {
    if (!after_clinch[k - 1]) continue;
    const double before = settled[k - 1]->max_active_budget();
    const double now = settled[k]->max_active_budget();
    const double elapsed = settled[k]->time - settled[k - 1]->time;
    if (now > before + tol || before - now > elapsed + tol)
      out.push_back({Property::BudgetDecline, std::nullopt,
                     "b_max " + fmt(before) + " -> " + fmt(now) + " over time " + fmt(elapsed)});
  }

  const AuctionState& last = events.empty() ? trajectory.initial : events.back().state;
  const double stop = trajectory.stop_price();
  std::size_t partial = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pay = at(last.payment, i);
    const double slack = epsilon * std::max(1.0, initial[i]);
    if (v[i] > stop + epsilon && pay < initial[i] - slack)
      out.push_back({Property::FullExtraction, i, "v above stop price but pays " + fmt(pay) + " < " + fmt(initial[i])});
    if (at(last.allocation, i) > epsilon && pay < initial[i] - slack) ++partial;
  }
  if (partial > 1)
    out.push_back({Property::PartialPayers, std::nullopt, std::to_string(partial) + " partial payers"});
  return out;
}

std::vector<Rational> even_grid(const Rational& top, std::size_t count) {
  std::vector<Rational> grid;
  if (count == 1) return {top};
  for (std::size_t k = 0; k < count; ++k)
    grid.push_back(top * Rational(static_cast<long>(k)) / Rational(static_cast<long>(count - 1)));
  return grid;
}

namespace {

std::string describe_profile(const Profile& profile) {
  std::ostringstream out;
  out << (profile.supply.is_divisible() ? "divisible" : "m=" + std::to_string(profile.supply.units()));
  for (const Bid& b : profile.bids) out << " (" << to_string(b.valuation) << "," << to_string(b.budget) << ")";
  return out.str();
}

double as_number(const Utility<double>& u) {
  return u.is_minus_infinity() ? -std::numeric_limits<double>::infinity() : u.value();
}

/// Utility of `bidder` and any violations from one engine run.
struct PointResult {
  Utility<double> utility;
  std::optional<Rational> exact;
  std::vector<Violation> violations;
};

PointResult run_point(const Profile& reported, const std::vector<Bid>& types, std::size_t bidder,
                      const SweepOptions& options, const std::string& label) {
  PointResult r;
  if (!reported.supply.is_divisible()) {
    const DiscreteRun run = run_discrete(reported, types);
    const Utility<Rational>& u = run.outcome.utility[bidder];
    r.exact = u.is_minus_infinity() ? Rational(-1000000) : u.value();
    r.utility = u.is_minus_infinity() ? Utility<double>::minus_infinity() : Utility<double>::finite(to_double(u.value()));
    return r;
  }
  try {
    const DivisibleRun run = run_divisible(reported, types, options.policy);
    r.utility = run.outcome.utility[bidder];
    if (options.check_invariants) {
      for (auto& v : check_trajectory(reported, run.trajectory, options.policy.check_epsilon))
        r.violations.push_back({v.property, v.bidder, label + v.detail});
      for (auto& v : check_outcome(reported, types, run.outcome, options.policy.check_epsilon))
        r.violations.push_back({v.property, v.bidder, label + v.detail});
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateStart) throw;
    r.utility = Utility<double>::finite(0.0);
  }
  return r;
}

}  // namespace

SweepReport monotonicity_sweep(const Profile& input, std::size_t bidder, const std::vector<Rational>& grid,
                               const SweepOptions& options) {
  const Profile profile = validate_profile(input);
  if (bidder >= profile.size()) throw Error(ErrorCode::ValidationError, "bidder index out of range");
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) || grid.front() < 0)
    throw Error(ErrorCode::ValidationError, "budget grid must be nonempty, sorted and nonnegative");

  SweepReport report;
  report.kind = SweepReport::Kind::BudgetMonotonicity;
  report.instance = describe_profile(profile);
  report.bidder = bidder;
  report.grid = grid;
  const bool exact = !profile.supply.is_divisible();
  report.tolerance = exact ? 0.0 : options.tolerance;

  std::vector<Bid> types = profile.bids;
  types[bidder].budget = std::max(grid.back(), profile.bids[bidder].budget);

  std::vector<Rational>& exact_utility = report.exact_utility;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Profile point = profile;
    point.bids[bidder].budget = grid[k];
    PointResult r = run_point(point, types, bidder, options, "B=" + to_string(grid[k]) + ": ");
    report.utility.push_back(r.utility);
    if (r.exact) exact_utility.push_back(*r.exact);
    for (auto& v : r.violations) report.invariant_violations.push_back(std::move(v));
    ++report.runs;
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double gap = as_number(report.utility[best]) - as_number(report.utility[k]);
    const bool dip = exact ? exact_utility[best] > exact_utility[k] : gap > report.tolerance;
    if (dip) {
      if (!report.witness || gap > report.witness->gap) report.witness = Witness{best, k, gap};
      report.verdict = SweepReport::Verdict::Violated;
    } else {
      report.largest_dip = std::max(report.largest_dip, gap);
    }
    const bool better = exact ? exact_utility[k] > exact_utility[best]
                              : as_number(report.utility[k]) > as_number(report.utility[best]);
    if (better) best = k;
  }
  return report;
}

SweepReport ic_valuation_sweep(const Profile& input, std::size_t bidder, const std::vector<Rational>& grid,
                               const Bid& truth, const SweepOptions& options) {
  const Profile profile = validate_profile(input);
  if (bidder >= profile.size()) throw Error(ErrorCode::ValidationError, "bidder index out of range");
  if (profile.bids[bidder].budget > truth.budget)
    throw Error(ErrorCode::ValidationError, "reported budget exceeds the true budget");

  SweepReport report;
  report.kind = SweepReport::Kind::ValuationIC;
  report.instance = describe_profile(profile);
  report.bidder = bidder;
  report.grid = grid;
  const bool exact = !profile.supply.is_divisible();
  report.tolerance = exact ? 0.0 : options.tolerance;

  std::vector<Bid> types = profile.bids;
  types[bidder] = truth;
  Profile honest = profile;
  honest.bids[bidder].valuation = truth.valuation;
  const PointResult base = run_point(honest, types, bidder, options, "truth: ");
  report.truthful_utility = base.utility;
  report.invariant_violations = base.violations;
  report.runs = 1;

  for (std::size_t k = 0; k < grid.size(); ++k) {
    Profile point = profile;
    point.bids[bidder].valuation = grid[k];
    PointResult r = run_point(point, types, bidder, options, "v=" + to_string(grid[k]) + ": ");
    report.utility.push_back(r.utility);
    if (r.exact) report.exact_utility.push_back(*r.exact);
    for (auto& v : r.violations) report.invariant_violations.push_back(std::move(v));
    ++report.runs;
    const double gap = as_number(r.utility) - as_number(base.utility);
    const bool beats = exact ? *r.exact > *base.exact : gap > report.tolerance;
    if (beats) {
      if (!report.witness || gap > report.witness->gap) report.witness = Witness{k, k, gap};
      report.verdict = SweepReport::Verdict::Violated;
    } else {
      report.largest_dip = std::max(report.largest_dip, gap);
    }
  }
  return report;
}

namespace {

std::string utility_text(const SweepReport& report, std::size_t k) {
  return k < report.exact_utility.size() ? to_string(report.exact_utility[k]) : to_string(report.utility[k]);
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << (report.kind == SweepReport::Kind::BudgetMonotonicity ? "budget" : "valuation") << ",utility\n";
  for (std::size_t k = 0; k < report.grid.size(); ++k)
    out << to_string(report.grid[k]) << ',' << utility_text(report, k) << '\n';
}

std::string describe(const SweepReport& report) {
  std::ostringstream out;
  const bool budget = report.kind == SweepReport::Kind::BudgetMonotonicity;
  out << (budget ? "budget monotonicity" : "valuation IC") << " sweep, bidder " << report.bidder << ", "
      << report.instance << '\n';
  out << "points: " << report.grid.size() << ", tolerance: " << fmt(report.tolerance) << '\n';
  if (report.truthful_utility) out << "truthful utility: " << to_string(*report.truthful_utility) << '\n';
  if (report.verdict == SweepReport::Verdict::Holds) {
    out << "verdict: holds (largest sub-tolerance dip " << fmt(report.largest_dip) << ")\n";
  } else {
    const Witness& w = *report.witness;
    if (budget)
      out << "verdict: violated, u(" << to_string(report.grid[w.first]) << ") = " << utility_text(report, w.first)
          << " > u(" << to_string(report.grid[w.second]) << ") = " << utility_text(report, w.second) << '\n';
    else
      out << "verdict: violated, reporting " << to_string(report.grid[w.first]) << " gains " << fmt(w.gap) << '\n';
  }
  out << "invariant violations: " << report.invariant_violations.size() << '\n';
  for (const Violation& v : report.invariant_violations) {
    out << "  " << to_string(v.property);
    if (v.bidder) out << " bidder " << *v.bidder;
    out << ": " << v.detail << '\n';
  }
  return out.str();
}

RunTimes run_times(const Trajectory& trajectory, std::size_t bidder) {
  RunTimes t;
  for (const Event& e : trajectory.events) {
    const bool entry = e.kind == EventKind::ClinchStart || e.kind == EventKind::JoinClinch;
    if (e.kind == EventKind::ClinchStart && !t.y) {
      t.y = e.state.time;
      t.y_price = e.price;
    }
    if (entry && e.bidder == bidder && !t.q) {
      t.q = e.state.time;
      t.q_price = e.price;
    }
  }
  t.f = trajectory.stop_time();
  t.f_price = trajectory.stop_price();
  return t;
}

double price_at_time(const Trajectory& trajectory, double t) {
  double t0 = trajectory.initial.time, p0 = trajectory.initial.price;
  for (const Event& e : trajectory.events) {
    const double t1 = e.state.time, p1 = e.state.price;
    if (t1 > t) return t1 > t0 ? p0 + (p1 - p0) * (t - t0) / (t1 - t0) : p0;
    t0 = t1;
    p0 = p1;
  }
  return p0;
}

StructureReport structure_times(const Profile& input, std::size_t bidder, const Rational& low_budget,
                                const Rational& high_budget, double tolerance, const NumericPolicy& policy) {
  const Profile profile = validate_profile(input);
  if (bidder >= profile.size()) throw Error(ErrorCode::ValidationError, "bidder index out of range");
  if (low_budget > high_budget) throw Error(ErrorCode::ValidationError, "low budget exceeds high budget");

  StructureReport r;
  std::vector<Bid> types = profile.bids;
  types[bidder].budget = high_budget;
  Profile low = profile, high = profile;
  low.bids[bidder].budget = low_budget;
  high.bids[bidder].budget = high_budget;
  r.low_run = run_divisible(low, types, policy);
  r.high_run = run_divisible(high, types, policy);
  r.low = run_times(r.low_run.trajectory, bidder);
  r.high = run_times(r.high_run.trajectory, bidder);
  r.low_utility = r.low_run.outcome.utility[bidder].value();
  r.high_utility = r.high_run.outcome.utility[bidder].value();
  r.utility_monotone = r.low_utility <= r.high_utility + std::max(tolerance, policy.check_epsilon);

  const double v = to_double(profile.bids[bidder].valuation);
  const auto fail_pre = [&](std::string why) {
    r.precondition = ErrorCode::PreconditionNotMet;
    r.precondition_detail = std::move(why);
  };
  if (low_budget == high_budget) {
    const auto same = [&](const std::optional<double>& a, const std::optional<double>& b) {
      return a.has_value() == b.has_value() && (!a || std::abs(*a - *b) <= tolerance);
    };
    r.ordering_holds = same(r.low.y, r.high.y) && same(r.low.q, r.high.q) && std::abs(r.low.f - r.high.f) <= tolerance;
    if (!r.ordering_holds) r.failure = "identical budgets gave different times";
    return r;
  }
  if (!r.low.y || !r.high.y) {
    fail_pre("a run never clinches");
  } else if (!r.low.q || !(*r.low.q < r.low.f)) {
    fail_pre("bidder does not clinch in Low before Low stops");
  } else if (!(r.low_utility > 0.0) || !(*r.low.q_price < v)) {
    fail_pre("bidder gains nothing in Low");
  }
  if (r.precondition) return r;

  const double f_min = std::min(r.low.f, r.high.f);
  std::ostringstream why;
  if (!r.high.q) {
    why << "bidder never clinches in High; ";
  } else {
    const double y0 = *r.low.y, y1 = *r.high.y, q0 = *r.low.q, q1 = *r.high.q;
    if (y0 > y1 + tolerance) why << "y0 > y1; ";
    if (y1 > q1 + tolerance) why << "y1 > q1; ";
    if (q1 > q0 + tolerance) why << "q1 > q0; ";
    if (!(q0 < f_min)) why << "q0 >= min(f0, f1); ";
    if (*r.low.y_price > *r.high.y_price + tolerance || *r.high.y_price > *r.high.q_price + tolerance ||
        *r.high.q_price > *r.low.q_price + tolerance)
      why << "prices out of order; ";
  }
  r.ordering_holds = why.str().empty();

  std::vector<double> times;
  for (const DivisibleRun* run : {&r.low_run, &r.high_run})
    for (const Event& e : run->trajectory.events)
      if (e.state.time <= f_min) times.push_back(e.state.time);
  times.push_back(f_min);
  std::sort(times.begin(), times.end());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double probe = k == 0 ? times[0] : 0.5 * (times[k - 1] + times[k]);
    for (const double t : {probe, times[k]}) {
      const double p0 = price_at_time(r.low_run.trajectory, t);
      const double p1 = price_at_time(r.high_run.trajectory, t);
      if (std::abs(p0 - p1) > tolerance) {
        r.coupling_holds = false;
        why << "p0(" << fmt(t) << ") = " << fmt(p0) << " != p1 = " << fmt(p1) << "; ";
        break;
      }
    }
    if (!r.coupling_holds) break;
  }
  const auto exits = [&](const Trajectory& tr) {
    std::vector<std::pair<double, std::size_t>> out;
    for (const Event& e : tr.events)
      if (e.kind == EventKind::ExitTransition && e.state.time < f_min - tolerance) out.emplace_back(e.price, *e.bidder);
    return out;
  };
  const auto e0 = exits(r.low_run.trajectory), e1 = exits(r.high_run.trajectory);
  bool exits_match = e0.size() == e1.size();
  for (std::size_t k = 0; exits_match && k < e0.size(); ++k)
    exits_match = e0[k].second == e1[k].second && std::abs(e0[k].first - e1[k].first) <= tolerance;
  if (!exits_match) {
    r.coupling_holds = false;
    why << "exit prices differ before min(f0, f1); ";
  }
  r.failure = why.str();
  return r;
}

EngineComparison compare_engines(const Profile& profile, double dt, const NumericPolicy& policy) {
  Outcome engine;
  try {
    engine = run_divisible(profile, std::nullopt, policy).outcome;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateStart) throw;
    return {0.0, 0.0};
  }
  const Outcome reference = integrate_fixed_step(profile, dt);
  return {(engine.allocation - reference.allocation).cwiseAbs().maxCoeff(),
          (engine.payment - reference.payment).cwiseAbs().maxCoeff()};
}

Profile random_profile(std::uint64_t seed, std::uint64_t index, const RandomProfileOptions& options) {
  const CounterRng rng = CounterRng(seed).split(index);
  const Rational scaled = options.top * options.denominator;
  const auto top = static_cast<std::uint64_t>(
      (boost::multiprecision::numerator(scaled) / boost::multiprecision::denominator(scaled)).convert_to<long long>());
  const std::uint64_t span = options.max_bidders - options.min_bidders + 1;
  const std::size_t n = options.min_bidders + rng.bits(0) % span;
  std::uint64_t counter = 1;
  const auto draw = [&] {
    const std::uint64_t k = options.positive ? 1 + rng.bits(counter++) % top : rng.bits(counter++) % (top + 1);
    return Rational(static_cast<long long>(k)) / Rational(options.denominator);
  };
  Profile p;
  for (std::size_t i = 0; i < n; ++i) {
    Bid b;
    b.valuation = draw();
    b.budget = draw();
    p.bids.push_back(b);
  }
  return validate_profile(p);
}

Utility<Rational> extraction_utility(const Profile& profile, std::size_t bidder, const Bid& truth,
                                     const Rational& reported_budget, const NumericPolicy& policy) {
  Profile reported = profile;
  reported.bids.at(bidder).budget = reported_budget;
  std::vector<Bid> types = profile.bids;
  types[bidder] = truth;
  const DivisibleRun run = run_divisible(reported, types, policy);
  return randomized_extraction(run.outcome, reported.bids, types).expected_utility[bidder];
}

}  // namespace clinchlab
