#include "clinchlab/discrete.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

namespace clinchlab {

namespace {

constexpr std::int64_t kDemandCap = std::numeric_limits<std::int64_t>::max() / 4;

/// ceil(q) - 1 for q >= 0, clamped to [0, kDemandCap].
std::int64_t below(const Rational& q) {
  if (q <= 0) return 0;
  const auto num = boost::multiprecision::numerator(q);
  const auto den = boost::multiprecision::denominator(q);
  auto floor_q = num / den;
  if (floor_q * den == num) floor_q -= 1;
  if (floor_q > kDemandCap) return kDemandCap;
  return floor_q.convert_to<std::int64_t>();
}

std::int64_t floor_units(const Rational& budget, const Rational& price) {
  const Rational q = budget / price;
  const auto f = boost::multiprecision::numerator(q) / boost::multiprecision::denominator(q);
  if (f > kDemandCap) return kDemandCap;
  return f.convert_to<std::int64_t>();
}

}  // namespace

std::int64_t demand_right_limit(const Rational& budget, const Rational& price, const Rational& valuation) {
  if (price <= 0) throw Error(ErrorCode::ZeroPrice, "demand needs a positive price");
  if (valuation <= price) return 0;
  return below(budget / price);
}

std::string_view to_string(DiscreteEvent::Kind kind) {
  switch (kind) {
    case DiscreteEvent::Kind::Clinch: return "Clinch";
    case DiscreteEvent::Kind::Exit: return "Exit";
    case DiscreteEvent::Kind::FinalAllocation: return "FinalAllocation";
    case DiscreteEvent::Kind::Stop: return "Stop";
  }
  return "Unknown";
}

namespace {

class DiscreteRunner {
 public:
  explicit DiscreteRunner(const Profile& profile) : profile_(profile) {
    const std::size_t n = profile.size();
    s_.price = 0;
    s_.supply = profile.supply.units();
    s_.units.assign(n, 0);
    s_.status.assign(n, DiscreteStatus::Dropped);
    for (std::size_t i = 0; i < n; ++i) {
      s_.budget.push_back(profile.bids[i].budget);
      if (profile.bids[i].valuation > 0 && profile.bids[i].budget > 0) s_.status[i] = DiscreteStatus::Active;
    }
  }

  void run() {
    while (true) {
      const auto next = next_price();
      if (!next) {
        final_allocation();
        return;
      }
      s_.price = *next;
      for (std::size_t i : profile_.order) {
        if (s_.status[i] == DiscreteStatus::Exiting) s_.status[i] = DiscreteStatus::Dropped;
        if (s_.status[i] == DiscreteStatus::Active && valuation(i) <= s_.price) {
          s_.status[i] = DiscreteStatus::Exiting;
          events_.push_back({DiscreteEvent::Kind::Exit, s_.price, i, 0, Rational(0)});
        }
      }
      if (settle()) return;
    }
  }

  DiscreteState state() const { return s_; }
  std::vector<DiscreteEvent> events() const { return events_; }

 private:
  const Rational& valuation(std::size_t i) const { return profile_.bids[i].valuation; }

  std::int64_t demand(std::size_t i) const {
    if (s_.status[i] != DiscreteStatus::Active) return 0;
    return demand_right_limit(s_.budget[i], s_.price, valuation(i));
  }

  std::int64_t active_demand() const {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < s_.budget.size(); ++i) total = std::min(kDemandCap, total + demand(i));
    return total;
  }

  /// Smallest breakpoint above the current price: a valuation or b_i / k
  /// with 1 <= k <= m + 1 (below b_i / (m + 1) bidder i demands >= m units).
  std::optional<Rational> next_price() const {
    std::optional<Rational> best;
    const std::int64_t k_cap = profile_.supply.units() + 1;
    const auto consider = [&](const Rational& q) {
      if (q > s_.price && (!best || q < *best)) best = q;
    };
    for (std::size_t i = 0; i < s_.budget.size(); ++i) {
      if (s_.status[i] != DiscreteStatus::Active) continue;
      consider(valuation(i));
      std::int64_t k = s_.price == 0 ? k_cap : std::min(k_cap, below(s_.budget[i] / s_.price));
      if (k >= 1) consider(s_.budget[i] / k);
    }
    return best;
  }

  void clinch(std::size_t i, std::int64_t units, DiscreteEvent::Kind kind) {
    const Rational cost = s_.price * units;
    s_.units[i] += units;
    s_.budget[i] -= cost;
    s_.supply -= units;
    events_.push_back({kind, s_.price, i, units, cost});
  }

  /// Clinches to a fixed point at the current price; returns true on stop.
  bool settle() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i : profile_.order) {
        if (s_.supply == 0 || active_demand() <= s_.supply) {
          final_allocation();
          return true;
        }
        if (s_.status[i] != DiscreteStatus::Active) continue;
        const std::int64_t others = active_demand() - demand(i);
        const std::int64_t gain = s_.supply - others;
        if (gain > 0) {
          clinch(i, gain, DiscreteEvent::Kind::Clinch);
          if (s_.budget[i] == 0) s_.status[i] = DiscreteStatus::Dropped;
          changed = true;
        }
      }
    }
    return false;
  }

  void final_allocation() {
    for (std::size_t i : profile_.order) {
      if (s_.supply == 0) break;
      const std::int64_t d = std::min(demand(i), s_.supply);
      if (d > 0) clinch(i, d, DiscreteEvent::Kind::FinalAllocation);
    }
    // Leftover units: active bidders first (an exact division leaves them one
    // unit short of b / p), then exiting bidders, each capped by floor(b / p).
    for (const DiscreteStatus group : {DiscreteStatus::Active, DiscreteStatus::Exiting}) {
      for (std::size_t i : profile_.order) {
        if (s_.supply == 0 || s_.price <= 0) break;
        if (s_.status[i] != group) continue;
        const std::int64_t q = std::min(s_.supply, floor_units(s_.budget[i], s_.price));
        if (q > 0) clinch(i, q, DiscreteEvent::Kind::FinalAllocation);
      }
    }
    events_.push_back({DiscreteEvent::Kind::Stop, s_.price, std::nullopt, 0, Rational(0)});
  }

  const Profile& profile_;
  DiscreteState s_;
  std::vector<DiscreteEvent> events_;
};

}  // namespace

DiscreteRun run_discrete(const Profile& input, const std::optional<std::vector<Bid>>& true_types) {
  const Profile profile = validate_profile(input);
  if (profile.supply.is_divisible())
    throw Error(ErrorCode::WrongSupplyKind, "discrete engine needs discrete supply");
  if (true_types && true_types->size() != profile.size())
    throw Error(ErrorCode::ValidationError, "true types must cover every bidder");

  DiscreteRunner runner(profile);
  runner.run();

  DiscreteRun out;
  out.events = runner.events();
  out.final_state = runner.state();
  const auto n = static_cast<Eigen::Index>(profile.size());
  out.outcome.allocation.resize(n);
  out.outcome.payment.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.outcome.allocation[i] = Rational(out.final_state.units[k]);
    out.outcome.payment[i] = profile.bids[k].budget - out.final_state.budget[k];
  }
  out.outcome.stop_price = out.final_state.price;
  assign_utilities(out.outcome, true_types ? *true_types : profile.bids);
  return out;
}

void write_discrete_events_csv(std::ostream& out, const std::vector<DiscreteEvent>& events) {
  out << "event,price,bidder,units,payment\n";
  for (const DiscreteEvent& ev : events) {
    out << to_string(ev.kind) << ',' << to_string(ev.price) << ',';
    if (ev.bidder) out << *ev.bidder;
    out << ',' << ev.units << ',' << to_string(ev.payment) << '\n';
  }
}

}  // namespace clinchlab
