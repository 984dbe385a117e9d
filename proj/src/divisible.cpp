#include "clinchlab/divisible.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace clinchlab {

int AuctionState::clinch_count() const {
  return static_cast<int>(std::count(clinching.begin(), clinching.end(), true));
}

bool AuctionState::has_exiting() const {
  return std::find(status.begin(), status.end(), BidderStatus::Exiting) != status.end();
}

double AuctionState::max_active_budget() const {
  double best = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    if (status[i] == BidderStatus::Active) best = std::max(best, budget[static_cast<Eigen::Index>(i)]);
  return best;
}

double AuctionState::demand_excluding(std::size_t bidder) const {
  return (budget.sum() - budget[static_cast<Eigen::Index>(bidder)]) / price;
}

double AuctionState::active_demand() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    if (status[i] == BidderStatus::Active) sum += budget[static_cast<Eigen::Index>(i)];
  return sum / price;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::ClinchStart: return "ClinchStart";
    case EventKind::JoinClinch: return "JoinClinch";
    case EventKind::ExitTransition: return "ExitTransition";
    case EventKind::DrainSegment: return "DrainSegment";
    case EventKind::ClinchSegment: return "ClinchSegment";
    case EventKind::OneShotAllocation: return "OneShotAllocation";
    case EventKind::Stop: return "Stop";
  }
  return "Unknown";
}

double Trajectory::stop_price() const { return events.empty() ? initial.price : events.back().price; }
double Trajectory::stop_time() const { return events.empty() ? initial.time : events.back().state.time; }

ClinchSegmentEnd clinch_segment_closed_form(double supply0, double budget0, double price0,
                                            double price1, int clinchers) {
  const double c = clinchers;
  const double log_ratio = std::log(price0 / price1);  // <= 0
  const double supply1 = supply0 * std::exp(c * log_ratio);
  // b(p) = b0 - S0 p0 ln(p/p0)                               (c = 1)
  // b(p) = b0 - S0 p0 (1 - (p0/p)^{c-1}) / (c - 1)           (c > 1)
  const double spent = clinchers == 1
                           ? -supply0 * price0 * log_ratio
                           : -supply0 * price0 * std::expm1((c - 1.0) * log_ratio) / (c - 1.0);
  return {supply1, budget0 - spent, (supply0 - supply1) / c, spent};
}

namespace {

struct Context {
  std::vector<double> valuation;
  std::vector<double> initial_budget;
  std::vector<std::size_t> order;
  NumericPolicy policy;
  /// Tolerance for structural equalities (stop test, clinch entry).
  double boundary_tol;
};

Context make_context(const Profile& profile, const NumericPolicy& policy) {
  Context ctx;
  for (const Bid& bid : profile.bids) {
    ctx.valuation.push_back(to_double(bid.valuation));
    ctx.initial_budget.push_back(to_double(bid.budget));
  }
  ctx.order = profile.order;
  ctx.policy = policy;
  ctx.boundary_tol = std::sqrt(policy.event_epsilon * policy.check_epsilon);
  return ctx;
}

bool within(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

AuctionState initial_state(const Context& ctx) {
  const auto n = ctx.valuation.size();
  AuctionState s;
  s.budget = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.allocation = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.payment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.status.assign(n, BidderStatus::Dropped);
  s.clinching.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (ctx.valuation[i] > 0.0 && ctx.initial_budget[i] > 0.0) {
      s.budget[static_cast<Eigen::Index>(i)] = ctx.initial_budget[i];
      s.status[i] = BidderStatus::Active;
    }
  }
  return s;
}

std::optional<std::size_t> first_exiting(const Context& ctx, const AuctionState& s) {
  for (std::size_t i : ctx.order)
    if (s.status[i] == BidderStatus::Exiting) return i;
  return std::nullopt;
}

/// Active bidder with the largest budget, earliest in priority among ties.
std::optional<std::size_t> top_active(const Context& ctx, const AuctionState& s) {
  std::optional<std::size_t> best;
  for (std::size_t i : ctx.order) {
    if (s.status[i] != BidderStatus::Active) continue;
    if (!best || s.budget[static_cast<Eigen::Index>(i)] > s.budget[static_cast<Eigen::Index>(*best)]) best = i;
  }
  return best;
}

double clinch_level(const AuctionState& s) {
  double level = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.clinching[i]) level = std::max(level, s.budget[static_cast<Eigen::Index>(i)]);
  return level;
}

/// Largest budget among Active non-clinchers and its owner.
std::pair<double, std::optional<std::size_t>> next_in_line(const Context& ctx, const AuctionState& s) {
  double target = 0.0;
  std::optional<std::size_t> owner;
  for (std::size_t i : ctx.order) {
    if (s.status[i] != BidderStatus::Active || s.clinching[i]) continue;
    const double b = s.budget[static_cast<Eigen::Index>(i)];
    if (!owner || b > target) {
      target = b;
      owner = i;
    }
  }
  return {target, owner};
}

EventCandidate next_event_impl(const Context& ctx, const AuctionState& s) {
  const double p = s.price;
  const int c = s.clinch_count();

  if (const auto exiting = first_exiting(ctx, s)) {
    // Price held at the exiting valuation; everything is linear in the drained amount.
    EventCandidate best{EventKind::DrainSegment, p, s.budget[static_cast<Eigen::Index>(*exiting)], exiting};
    if (c > 0) {
      const auto [target, owner] = next_in_line(ctx, s);
      const double gap = clinch_level(s) - target;
      if (gap < best.amount)
        best = {target > 0.0 ? EventKind::JoinClinch : EventKind::Stop, p, std::max(gap, 0.0), owner};
    } else if (const auto top = top_active(ctx, s)) {
      const double rest = s.budget.sum() - s.budget[static_cast<Eigen::Index>(*top)];
      const double gap = rest - p * s.supply;
      if (gap > 0.0 && gap < best.amount) best = {EventKind::ClinchStart, p, gap, top};
    }
    return best;
  }

  EventCandidate best{EventKind::ExitTransition, std::numeric_limits<double>::infinity(), 0.0, std::nullopt};
  for (std::size_t i : ctx.order) {
    if (s.status[i] == BidderStatus::Active && ctx.valuation[i] < best.price) {
      best.price = ctx.valuation[i];
      best.bidder = i;
    }
  }
  if (!best.bidder) throw Error(ErrorCode::NumericalFailure, "next_event called on a stopped auction");

  if (c == 0) {
    const auto top = top_active(ctx, s);
    double active_sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.status[i] == BidderStatus::Active) active_sum += s.budget[static_cast<Eigen::Index>(i)];
    if (s.supply > 0.0) {
      const double stop_price = active_sum / s.supply;
      if (stop_price > p && stop_price < best.price) best = {EventKind::Stop, stop_price, 0.0, std::nullopt};
      const double rest = s.budget.sum() - s.budget[static_cast<Eigen::Index>(*top)];
      const double start_price = rest / s.supply;
      if (rest > 0.0 && start_price > p && start_price < best.price)
        best = {EventKind::ClinchStart, start_price, 0.0, top};
    }
    return best;
  }

  const double level = clinch_level(s);
  const auto [target, owner] = next_in_line(ctx, s);
  const auto budget_at = [&](double q) { return clinch_segment_closed_form(s.supply, level, p, q, c).budget; };
  if (budget_at(best.price) - target > ctx.boundary_tol * std::max(level, 1e-300)) return best;

  // b(p) is decreasing on the segment: bisect b(q) = target.
  double lo = p;
  double hi = best.price;
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    if (hi - lo <= ctx.policy.event_epsilon * hi) {
      converged = true;
      break;
    }
    const double mid = 0.5 * (lo + hi);
    if (budget_at(mid) > target) lo = mid; else hi = mid;
  }
  if (!converged) throw Error(ErrorCode::NumericalFailure, "event root bracketing failed");
  return {target > 0.0 ? EventKind::JoinClinch : EventKind::Stop, hi, 0.0, owner};
}

class Runner {
 public:
  explicit Runner(Context ctx) : ctx_(std::move(ctx)), state_(initial_state(ctx_)) {
    exited_while_clinching_.assign(ctx_.valuation.size(), false);
  }

  Trajectory run() {
    Trajectory trajectory;
    trajectory.initial = state_;
    if (std::none_of(state_.status.begin(), state_.status.end(),
                     [](BidderStatus st) { return st == BidderStatus::Active; }))
      throw Error(ErrorCode::DegenerateStart, "no bidder has positive valuation and budget");

    const std::size_t cap = 1000 + 200 * state_.size() * state_.size();
    for (std::size_t step = 0; step < cap; ++step) {
      if (settle(trajectory.events)) return trajectory;
      advance(next_event_impl(ctx_, state_), trajectory.events);
    }
    throw Error(ErrorCode::NumericalFailure, "event loop did not terminate");
  }

 private:
  void emit(std::vector<Event>& events, EventKind kind, std::optional<std::size_t> bidder = std::nullopt) {
    events.push_back(Event{kind, state_.price, bidder, state_});
  }

  double& b(std::size_t i) { return state_.budget[static_cast<Eigen::Index>(i)]; }

  void sync_payment(std::size_t i) {
    state_.payment[static_cast<Eigen::Index>(i)] = ctx_.initial_budget[i] - b(i);
  }

  /// Status updates, stopping test and clinch-set growth at the current price.
  /// Returns true once the final allocation has run.
  bool settle(std::vector<Event>& events) {
    for (std::size_t i : ctx_.order) {
      if (state_.status[i] == BidderStatus::Dropped) continue;
      if (b(i) <= 0.0) {
        b(i) = 0.0;
        state_.status[i] = BidderStatus::Dropped;
        state_.clinching[i] = false;
      } else if (state_.status[i] == BidderStatus::Active && ctx_.valuation[i] <= state_.price) {
        state_.status[i] = BidderStatus::Exiting;
        exited_while_clinching_[i] = state_.clinching[i];
        state_.clinching[i] = false;
        emit(events, EventKind::ExitTransition, i);
      }
    }

    if (stopping()) {
      one_shot(events);
      return true;
    }

    if (state_.clinch_count() == 0) {
      const auto top = top_active(ctx_, state_);
      if (!top || state_.price <= 0.0) return false;
      const double rest = state_.budget.sum() - b(*top);
      if (!within(rest, state_.price * state_.supply, ctx_.boundary_tol)) return false;
      const double level = b(*top);
      for (std::size_t i : ctx_.order) {
        if (state_.status[i] == BidderStatus::Active && b(i) >= level * (1.0 - ctx_.boundary_tol)) {
          state_.clinching[i] = true;
          emit(events, EventKind::ClinchStart, i);
        }
      }
    } else {
      const double level = clinch_level(state_);
      for (std::size_t i : ctx_.order) {
        if (state_.status[i] == BidderStatus::Active && !state_.clinching[i] &&
            b(i) >= level * (1.0 - ctx_.boundary_tol)) {
          state_.clinching[i] = true;
          emit(events, EventKind::JoinClinch, i);
        }
      }
    }
    return false;
  }

  bool stopping() const {
    double active_sum = 0.0;
    bool any_active = false;
    for (std::size_t i = 0; i < state_.size(); ++i) {
      if (state_.status[i] != BidderStatus::Active) continue;
      any_active = true;
      active_sum += state_.budget[static_cast<Eigen::Index>(i)];
    }
    if (!any_active) return true;
    if (state_.price <= 0.0) return false;
    const double held = state_.price * state_.supply;
    return active_sum <= held + ctx_.boundary_tol * std::max(active_sum, held);
  }

  void give(std::size_t i, double quantity, std::vector<Event>& events) {
    state_.allocation[static_cast<Eigen::Index>(i)] += quantity;
    state_.payment[static_cast<Eigen::Index>(i)] += quantity * state_.price;
    b(i) = std::max(0.0, b(i) - quantity * state_.price);
    emit(events, EventKind::OneShotAllocation, i);
  }

  void one_shot(std::vector<Event>& events) {
    const double p = state_.price;
    double residual = state_.supply;
    if (p > 0.0) {
      for (std::size_t i : ctx_.order) {
        if (state_.status[i] != BidderStatus::Active) continue;
        const double quantity = b(i) / p;
        state_.allocation[static_cast<Eigen::Index>(i)] += quantity;
        state_.payment[static_cast<Eigen::Index>(i)] = ctx_.initial_budget[i];
        b(i) = 0.0;
        residual -= quantity;
        state_.supply = std::max(residual, 0.0);
        emit(events, EventKind::OneShotAllocation, i);
      }
      residual = std::max(residual, 0.0);
      state_.supply = residual;
      // Exiting bidders share the rest; whoever left the clinching set goes last.
      for (const bool former_clincher : {false, true}) {
        for (std::size_t j : ctx_.order) {
          if (state_.status[j] != BidderStatus::Exiting || exited_while_clinching_[j] != former_clincher)
            continue;
          if (residual <= 0.0) break;
          const double quantity = std::min(residual, b(j) / p);
          if (quantity <= 0.0) continue;
          residual -= quantity;
          state_.supply = residual;
          give(j, quantity, events);
        }
      }
    }
    state_.supply = residual <= ctx_.boundary_tol ? 0.0 : residual;
    emit(events, EventKind::Stop);
  }

  void advance(const EventCandidate& next, std::vector<Event>& events) {
    const int c = state_.clinch_count();
    const double p = state_.price;

    if (const auto exiting = first_exiting(ctx_, state_)) {
      const double d = next.amount;
      b(*exiting) = next.kind == EventKind::DrainSegment ? 0.0 : std::max(0.0, b(*exiting) - d);
      for (std::size_t i = 0; i < state_.size(); ++i) {
        if (!state_.clinching[i]) continue;
        b(i) = next.kind == EventKind::Stop ? 0.0 : std::max(0.0, b(i) - d);
        state_.allocation[static_cast<Eigen::Index>(i)] += d / p;
        sync_payment(i);
      }
      state_.supply -= c * d / p;
      state_.time += d;
      snap_supply();
      emit(events, EventKind::DrainSegment, exiting);
      return;
    }

    const double p1 = next.price;
    if (c > 0) {
      const double level = clinch_level(state_);
      const ClinchSegmentEnd end = clinch_segment_closed_form(state_.supply, level, p, p1, c);
      for (std::size_t i = 0; i < state_.size(); ++i) {
        if (!state_.clinching[i]) continue;
        b(i) = next.kind == EventKind::Stop ? 0.0 : std::max(0.0, end.budget);
        state_.allocation[static_cast<Eigen::Index>(i)] += end.allocation_per_clincher;
        sync_payment(i);
      }
      state_.supply = end.supply;
      snap_supply();
    }
    state_.time += p1 - p;
    state_.price = p1;
    if (c > 0) emit(events, EventKind::ClinchSegment);
  }

  void snap_supply() {
    if (state_.supply < 1e-13) state_.supply = 0.0;
  }

  Context ctx_;
  AuctionState state_;
  std::vector<bool> exited_while_clinching_;
};

void require_divisible(const Profile& profile) {
  if (!profile.supply.is_divisible())
    throw Error(ErrorCode::WrongSupplyKind, "divisible engine needs divisible supply");
}

}  // namespace

EventCandidate next_event(const Profile& profile, const AuctionState& state, const NumericPolicy& policy) {
  const Profile validated = validate_profile(profile);
  return next_event_impl(make_context(validated, policy), state);
}

DivisibleRun run_divisible(const Profile& profile, const std::optional<std::vector<Bid>>& true_types,
                           const NumericPolicy& policy) {
  policy.validate();
  if (policy.mode != NumericMode::Float64)
    throw Error(ErrorCode::InvalidPolicy, "the divisible engine runs in Float64 mode");
  const Profile validated = validate_profile(profile);
  require_divisible(validated);
  if (true_types && true_types->size() != validated.size())
    throw Error(ErrorCode::ValidationError, "true types must cover every bidder");

  Runner runner(make_context(validated, policy));
  DivisibleRun run;
  run.trajectory = runner.run();
  const AuctionState& last = run.trajectory.events.back().state;
  run.outcome.allocation = last.allocation;
  run.outcome.payment = last.payment;
  run.outcome.stop_price = last.price;
  assign_utilities(run.outcome, true_types ? *true_types : validated.bids, policy.check_epsilon);
  return run;
}

namespace {

/// S0 * p0^c * integral_a^b (v - p) p^{-c-1} dp
double clinch_utility(double supply0, double price0, int c, double a, double b, double v) {
  const double ra = price0 / a;
  const double rb = price0 / b;
  const double value_part = v / c * (std::pow(ra, c) - std::pow(rb, c));
  const double price_part =
      c == 1 ? price0 * std::log(b / a) : price0 * (std::pow(ra, c - 1) - std::pow(rb, c - 1)) / (c - 1);
  return supply0 * (value_part - price_part);
}

}  // namespace

double utility_between(const Trajectory& trajectory, std::size_t bidder, double price_low, double price_high,
                       double true_valuation) {
  const double stop = trajectory.stop_price();
  if (bidder >= trajectory.initial.size())
    throw Error(ErrorCode::WindowOutOfRange, "bidder not part of the run");
  if (!(price_low >= 0.0) || !(price_low <= price_high) || price_high > stop * (1.0 + 1e-12))
    throw Error(ErrorCode::WindowOutOfRange, "price window outside the trajectory");
  if (price_low == price_high) return 0.0;

  const auto idx = static_cast<Eigen::Index>(bidder);
  double utility = 0.0;
  const AuctionState* prev = &trajectory.initial;
  for (const Event& ev : trajectory.events) {
    switch (ev.kind) {
      case EventKind::ClinchSegment: {
        if (prev->clinching[bidder]) {
          const double a = std::max(price_low, prev->price);
          const double b = std::min(price_high, ev.price);
          if (a < b) utility += clinch_utility(prev->supply, prev->price, prev->clinch_count(), a, b, true_valuation);
        }
        break;
      }
      case EventKind::DrainSegment:
      case EventKind::OneShotAllocation: {
        const double dx = ev.state.allocation[idx] - prev->allocation[idx];
        if (dx > 0.0 && ev.price > price_low && ev.price <= price_high)
          utility += (true_valuation - ev.price) * dx;
        break;
      }
      default:
        break;
    }
    prev = &ev.state;
  }
  return utility;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const std::size_t n = trajectory.initial.size();
  out << "event_kind,price,S";
  for (std::size_t i = 0; i < n; ++i) out << ",b_" << i << ",x_" << i << ",P_" << i;
  out << '\n';
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const Event& ev : trajectory.events) {
    out << to_string(ev.kind) << ',' << num(ev.price) << ',' << num(ev.state.supply);
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      out << ',' << num(ev.state.budget[idx]) << ',' << num(ev.state.allocation[idx]) << ','
          << num(ev.state.payment[idx]);
    }
    out << '\n';
  }
}

}  // namespace clinchlab
