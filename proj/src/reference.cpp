#include "clinchlab/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace clinchlab {

namespace {
// Relative slack for ties that rounding over many steps can split.
constexpr double kTieSlack = 1e-9;
}  // namespace

Outcome integrate_fixed_step(const Profile& input, double dt, double check_epsilon) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidStep, "dt must be positive");
  const Profile profile = validate_profile(input);
  if (!profile.supply.is_divisible())
    throw Error(ErrorCode::WrongSupplyKind, "integrator needs divisible supply");

  const std::size_t n = profile.size();
  std::vector<double> v(n), b(n, 0.0), x(n, 0.0), pay(n, 0.0);
  double top_value = 0.0, budget_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = to_double(profile.bids[i].valuation);
    const double budget = to_double(profile.bids[i].budget);
    if (v[i] > 0.0 && budget > 0.0) b[i] = budget;
    top_value = std::max(top_value, v[i]);
    budget_total += b[i];
  }
  // Price steps are bounded by the top valuation, drain steps by the budgets.
  const double horizon = top_value + budget_total;
  if (std::all_of(b.begin(), b.end(), [](double bi) { return bi == 0.0; }))
    throw Error(ErrorCode::DegenerateStart, "no bidder has positive valuation and budget");

  // Membership in the clinching set is tested against S = D_{-i} with a
  // step-dependent band.
  const double band = 10.0 * dt * static_cast<double>(n);
  const double drift_limit = 10.0 * check_epsilon;

  std::vector<bool> reached(n, false);    // D_{-i} >= S observed at some p > 0
  std::vector<bool> clinching(n, false);
  std::vector<bool> left_clinching(n, false);
  std::vector<bool> active(n), exiting(n);

  long long price_steps = 0;
  double grid_base = 0.0;
  double stop_band = 0.0;
  double p = 0.0;
  double S = 1.0;
  const long long max_steps = static_cast<long long>(2.0 * horizon / dt) + 1000;

  for (long long step = 0;; ++step) {
    if (step > max_steps) throw Error(ErrorCode::NumericalFailure, "integrator did not stop");

    // steps * dt can land just below a valuation that lies on the grid.
    const double reached_price = p * (1.0 + kTieSlack);
    double total = 0.0, active_sum = 0.0;
    bool any_active = false;
    for (std::size_t i = 0; i < n; ++i) {
      total += b[i];
      active[i] = b[i] > 0.0 && v[i] > reached_price;
      exiting[i] = b[i] > 0.0 && !active[i];
      if (exiting[i] && clinching[i]) left_clinching[i] = true;
      if (!active[i]) clinching[i] = false;
      if (active[i]) {
        any_active = true;
        active_sum += b[i];
      }
    }

    // Final allocation. After price steps with clinchers S tracks the active demand
    // from below by about n dt / p, so the stop test allows that gap; active
    // bidders then share what is left of S.
    if (!any_active || (p > 0.0 && active_sum / p <= S + stop_band + kTieSlack * active_sum / p)) {
      if (p > 0.0) {
        const double share = active_sum / p > S ? std::max(S, 0.0) * p / active_sum : 1.0;
        for (std::size_t i : profile.order) {
          if (!active[i]) continue;
          x[i] += share * b[i] / p;
          pay[i] += share * b[i];
          S -= share * b[i] / p;
          b[i] = 0.0;
        }
        double rest = std::max(S, 0.0);
        for (const bool former : {false, true}) {
          for (std::size_t j : profile.order) {
            if (!exiting[j] || left_clinching[j] != former || rest <= 0.0) continue;
            const double q = std::min(rest, b[j] / p);
            x[j] += q;
            pay[j] += q * p;
            rest -= q;
          }
        }
      }
      break;
    }

    if (p > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        const double others = (total - b[i]) / p;
        if (others >= S) reached[i] = true;
        // Clinchers keep D_{-i} = S; Euler lets it run ahead of S.
        if (clinching[i] && others - S > drift_limit)
          throw Error(ErrorCode::StepTooCoarse, "clinching invariant drifted beyond tolerance");
        // Enter on crossing, stay while within the band.
        clinching[i] = reached[i] && (others <= S + kTieSlack * total / p || (clinching[i] && others <= S + band));
        if (reached[i] && S - others > drift_limit)
          throw Error(ErrorCode::StepTooCoarse, "supply invariant drifted beyond tolerance");
      }
    }

    const auto drain_from = std::find_if(profile.order.begin(), profile.order.end(),
                                         [&](std::size_t j) { return exiting[j]; });
    if (drain_from == profile.order.end()) {
      // Price step: price rises, clinchers pay S per unit time. The step ends
      // early on the next valuation, entry into the clinching set or stop, so
      // the grid never straddles an event.
      int clinchers = 0;
      for (std::size_t i = 0; i < n; ++i) clinchers += clinching[i] ? 1 : 0;
      // Euler step h after which level / (p + h) meets S: level - c S h over
      // p + h against S (1 - c h / p).
      const auto crossing = [&](double level) {
        const double g = level - S * p;
        if (S <= 0.0 || g <= kTieSlack * level) return dt;
        if (clinchers == 0) return g / S;
        const double a = clinchers * S / p;
        const double disc = S * S - 4.0 * a * g;
        return disc < 0.0 ? dt : 2.0 * g / (S + std::sqrt(disc));
      };
      double h = dt;
      double target = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        if (v[i] - p < h) {
          h = v[i] - p;
          target = v[i];
        }
      }
      const auto shorten = [&](double step) {
        if (step < h) {
          h = step;
          target = -1.0;
        }
      };
      for (std::size_t i = 0; i < n; ++i)
        if (active[i] && !clinching[i]) shorten(crossing(total - b[i]));
      shorten(crossing(active_sum));

      stop_band = clinchers > 0 ? static_cast<double>(n) * dt / p : 0.0;
      const double spend = S * h;
      double sold = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!clinching[i]) continue;
        const double take = std::min(spend, b[i]);
        b[i] -= take;
        pay[i] += take;
        x[i] += take / p;
        sold += take / p;
      }
      S -= sold;
      if (h < dt) {
        p = target >= 0.0 ? target : p + h;
        grid_base = p;
        price_steps = 0;
      } else {
        ++price_steps;
        p = grid_base + static_cast<double>(price_steps) * dt;
      }
    } else {
      // Drain step: price held, drain the first exiting bidder.
      const std::size_t j = *drain_from;
      double d = std::min(dt, b[j]);
      // End the step on the next bidder's entry: its gap D_{-i} - S shrinks
      // by d / p per unit drained.
      for (std::size_t i = 0; i < n; ++i) {
        if (!active[i] || clinching[i]) continue;
        const double gap = total - b[i] - S * p;
        if (gap > kTieSlack * total) d = std::min(d, gap);
      }
      b[j] -= d;
      for (std::size_t i = 0; i < n; ++i) {
        if (!clinching[i]) continue;
        const double take = std::min(d, b[i]);
        b[i] -= take;
        pay[i] += take;
        x[i] += take / p;
        S -= take / p;
      }
    }
  }

  Outcome out;
  out.allocation = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n));
  out.payment = Eigen::Map<const Eigen::VectorXd>(pay.data(), static_cast<Eigen::Index>(n));
  out.stop_price = p;
  assign_utilities(out, profile.bids, 10.0 * check_epsilon);
  return out;
}

}  // namespace clinchlab
