#include "clinchlab/bayesian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace clinchlab {

void Prior::validate() const {
  const auto strictly_increasing_positive = [](const std::vector<Rational>& grid) {
    if (grid.empty() || grid.front() <= 0) return false;
    for (std::size_t k = 1; k < grid.size(); ++k)
      if (!(grid[k - 1] < grid[k])) return false;
    return true;
  };
  if (!strictly_increasing_positive(valuations))
    throw Error(ErrorCode::InvalidPrior, "valuations must be positive and strictly increasing");
  if (!strictly_increasing_positive(budgets))
    throw Error(ErrorCode::InvalidPrior, "budgets must be positive and strictly increasing");
  if (bidders.empty()) throw Error(ErrorCode::InvalidPrior, "prior has no bidders");
  for (std::size_t i = 0; i < bidders.size(); ++i) {
    const BidderPrior& b = bidders[i];
    const std::string who = "bidder " + std::to_string(i) + ": ";
    if (b.kappa < 0 || b.kappa > 1) throw Error(ErrorCode::InvalidPrior, who + "kappa outside [0, 1]");
    if (b.probability.rows() != static_cast<Eigen::Index>(K()) ||
        b.probability.cols() != static_cast<Eigen::Index>(M()))
      throw Error(ErrorCode::InvalidPrior, who + "probability table must be K x M");
    Rational total = 0;
    for (Eigen::Index k = 0; k < b.probability.rows(); ++k)
      for (Eigen::Index m = 0; m < b.probability.cols(); ++m) {
        if (b.probability(k, m) < 0) throw Error(ErrorCode::InvalidPrior, who + "negative probability");
        total += b.probability(k, m);
      }
    if (total != 1) throw Error(ErrorCode::InvalidPrior, who + "probabilities sum to " + to_string(total));
  }
}

LPInstance build_lp(const Prior& prior, Objective objective) {
  prior.validate();
  LPInstance lp;
  lp.objective = objective;
  LPShape& s = lp.shape;
  s.n = prior.size();
  s.K = prior.K();
  s.M = prior.M();
  const std::size_t vars = 2 * s.per_kind();

  std::vector<std::vector<std::pair<std::size_t, Rational>>> rows;
  std::vector<Rational> rhs;
  const auto add_row = [&](std::vector<std::pair<std::size_t, Rational>> row, Rational bound) {
    rows.push_back(std::move(row));
    rhs.push_back(std::move(bound));
  };

  // Supply in expectation.
  std::vector<std::pair<std::size_t, Rational>> supply;
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t k = 0; k < s.K; ++k)
      for (std::size_t m = 0; m < s.M; ++m) {
        const Rational& f = prior.bidders[i].probability(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
        if (f != 0) supply.emplace_back(s.x_index(i, k, m), f);
      }
  add_row(std::move(supply), Rational(1));

  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t k = 0; k < s.K; ++k)
      for (std::size_t m = 0; m < s.M; ++m) {
        const Rational& sk = prior.valuations[k];
        // s_k x_ilt - P_ilt - s_k x_ikm + P_ikm <= 0
        for (std::size_t l = 0; l < s.K; ++l)
          for (std::size_t t = 0; t <= m; ++t) {
            if (l == k && t == m) continue;
            add_row({{s.x_index(i, l, t), sk},
                     {s.p_index(i, l, t), Rational(-1)},
                     {s.x_index(i, k, m), Rational(0) - sk},
                     {s.p_index(i, k, m), Rational(1)}},
                    Rational(0));
            ++lp.ic_rows;
          }
        add_row({{s.x_index(i, k, m), Rational(0) - sk}, {s.p_index(i, k, m), Rational(1)}}, Rational(0));
        add_row({{s.x_index(i, k, m), Rational(1)}}, prior.bidders[i].kappa);
        add_row({{s.p_index(i, k, m), Rational(1)}}, prior.budgets[m]);
      }

  LinearProgram<Rational>& p = lp.program;
  p.A = Matrix<Rational>::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vars));
  p.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto& [col, value] : rows[r]) {
      p.A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) += value;
      ++lp.nonzeros;
    }
    p.b[static_cast<Eigen::Index>(r)] = rhs[r];
  }
  p.c = Vector<Rational>::Zero(static_cast<Eigen::Index>(vars));
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t k = 0; k < s.K; ++k)
      for (std::size_t m = 0; m < s.M; ++m) {
        const Rational& f = prior.bidders[i].probability(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
        if (objective == Objective::Revenue)
          p.c[static_cast<Eigen::Index>(s.p_index(i, k, m))] = f;
        else
          p.c[static_cast<Eigen::Index>(s.x_index(i, k, m))] = f * prior.valuations[k];
      }
  return lp;
}

template <typename Scalar>
LPSolution<Scalar> solve_lp(const LPInstance& lp) {
  SimplexResult<Scalar> r;
  if constexpr (std::is_same_v<Scalar, Rational>) {
    r = solve_simplex(lp.program);
  } else {
    LinearProgram<double> p;
    const auto to_d = [](const Rational& v) { return to_double(v); };
    p.A = lp.program.A.unaryExpr(to_d);
    p.b = lp.program.b.unaryExpr(to_d);
    p.c = lp.program.c.unaryExpr(to_d);
    r = solve_simplex(p);
  }
  LPSolution<Scalar> out;
  out.shape = lp.shape;
  const auto half = static_cast<Eigen::Index>(lp.shape.per_kind());
  out.x = r.x.head(half);
  out.P = r.x.tail(half);
  out.objective = r.objective;
  out.pivots = r.pivots;
  return out;
}

template LPSolution<double> solve_lp<double>(const LPInstance&);
template LPSolution<Rational> solve_lp<Rational>(const LPInstance&);

LPSolution<double> to_float(const LPSolution<Rational>& solution) {
  LPSolution<double> out;
  const auto to_d = [](const Rational& v) { return to_double(v); };
  out.shape = solution.shape;
  out.x = solution.x.unaryExpr(to_d);
  out.P = solution.P.unaryExpr(to_d);
  out.objective = to_double(solution.objective);
  out.pivots = solution.pivots;
  return out;
}

LPSolution<double> solve_lp_auto(const LPInstance& lp, std::size_t rational_limit) {
  if (lp.nonzeros < rational_limit) return to_float(solve_lp<Rational>(lp));
  return solve_lp<double>(lp);
}

double default_alpha() { return 2.0 + std::sqrt(2.0); }

double guarantee_factor(double alpha) { return (alpha - 2.0) / (alpha * (alpha - 1.0)); }

TypeIndex locate_report(const Prior& prior, const Bid& report) {
  if (report.valuation == 0 || report.budget == 0) return {};
  const auto find = [](const std::vector<Rational>& grid, const Rational& value) {
    const auto it = std::find(grid.begin(), grid.end(), value);
    return it == grid.end() ? -1 : static_cast<int>(it - grid.begin());
  };
  TypeIndex t{find(prior.valuations, report.valuation), find(prior.budgets, report.budget)};
  if (t.is_zero())
    throw Error(ErrorCode::ReportOffGrid,
                "report (" + to_string(report.valuation) + ", " + to_string(report.budget) + ") is off the grid");
  return t;
}

void round_indices(const LPSolution<double>& lp, double alpha, const std::vector<TypeIndex>& types,
                   Eigen::VectorXd& allocation, Eigen::VectorXd& payment, std::vector<double>& z,
                   std::vector<bool>& served) {
  const std::size_t n = types.size();
  allocation = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  payment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  z.assign(n, 0.0);
  served.assign(n, false);
  const double threshold = 1.0 / alpha;
  double used = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = 1.0 - used;
    if (z[i] < threshold) continue;
    served[i] = true;
    if (types[i].is_zero()) continue;
    const auto k = static_cast<std::size_t>(types[i].k), m = static_cast<std::size_t>(types[i].m);
    allocation[static_cast<Eigen::Index>(i)] = lp.x_at(i, k, m) / alpha;
    payment[static_cast<Eigen::Index>(i)] = lp.p_at(i, k, m) / alpha;
    used += allocation[static_cast<Eigen::Index>(i)];
  }
}

RoundedOutcome run_rounded_mechanism(const Prior& prior, const LPSolution<double>& lp, double alpha,
                                     const std::vector<Bid>& reports, std::uint64_t seed, const Rational& delta) {
  if (!(alpha > 2.0)) throw Error(ErrorCode::ValidationError, "alpha must exceed 2");
  if (reports.size() != prior.size()) throw Error(ErrorCode::ValidationError, "one report per bidder");
  std::vector<TypeIndex> types;
  for (const Bid& b : reports) types.push_back(locate_report(prior, b));

  RoundedOutcome r;
  round_indices(lp, alpha, types, r.outcome.allocation, r.outcome.payment, r.z, r.served);
  assign_utilities(r.outcome, reports, 0.0);
  r.threat = threat_wrap(to_exact(r.outcome), reports, delta);
  r.realized = sample(r.threat, seed);
  return r;
}

std::vector<TypeIndex> sample_types(const Prior& prior, std::uint64_t seed, std::uint64_t s) {
  const CounterRng rng = CounterRng(seed).split(s);
  std::vector<TypeIndex> types;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const double u = rng.uniform(i);
    const Matrix<Rational>& f = prior.bidders[i].probability;
    double cumulative = 0.0;
    TypeIndex chosen;
    for (Eigen::Index k = 0; k < f.rows() && chosen.is_zero(); ++k)
      for (Eigen::Index m = 0; m < f.cols(); ++m) {
        cumulative += to_double(f(k, m));
        if (u < cumulative && f(k, m) > 0) {
          chosen = {static_cast<int>(k), static_cast<int>(m)};
          break;
        }
      }
    if (chosen.is_zero()) {  // u fell in the rounding gap above the last atom
      for (Eigen::Index k = f.rows() - 1; k >= 0 && chosen.is_zero(); --k)
        for (Eigen::Index m = f.cols() - 1; m >= 0; --m)
          if (f(k, m) > 0) {
            chosen = {static_cast<int>(k), static_cast<int>(m)};
            break;
          }
    }
    types.push_back(chosen);
  }
  return types;
}

GuaranteeEstimate estimate_guarantee(const Prior& prior, const LPSolution<double>& lp, double alpha,
                                     std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorCode::ValidationError, "need at least one sample");
  if (!(alpha > 2.0)) throw Error(ErrorCode::ValidationError, "alpha must exceed 2");
  const std::size_t n = prior.size();
  GuaranteeEstimate g;
  g.samples = samples;
  g.lp_value = lp.objective;
  g.alpha = alpha;
  g.served_rate.assign(n, 0.0);

  Eigen::VectorXd allocation, payment;
  std::vector<double> z;
  std::vector<bool> served;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    round_indices(lp, alpha, sample_types(prior, seed, s), allocation, payment, z, served);
    const double revenue = payment.sum();
    const double delta = revenue - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (revenue - mean);
    for (std::size_t i = 0; i < n; ++i)
      if (served[i]) g.served_rate[i] += 1.0;
  }
  const double N = static_cast<double>(samples);
  g.revenue = mean;
  const double variance = samples > 1 ? m2 / (N - 1.0) : 0.0;
  g.revenue_radius = std::sqrt(variance / N);
  for (double& w : g.served_rate) {
    w /= N;
    g.served_radius.push_back(std::sqrt(w * (1.0 - w) / N));
  }
  g.revenue_bound = lp.objective * guarantee_factor(alpha);
  g.served_bound = (alpha - 2.0) / (alpha - 1.0);
  return g;
}

ICCheck exhaustive_ic_check(const Prior& prior, const LPSolution<double>& lp, double alpha, double tolerance) {
  const std::size_t n = prior.size(), K = prior.K(), M = prior.M();
  ICCheck check;
  // Every type profile of all bidders, including the zero type.
  std::vector<TypeIndex> grid{TypeIndex{}};
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t m = 0; m < M; ++m) grid.push_back({static_cast<int>(k), static_cast<int>(m)});

  std::vector<std::size_t> digits(n, 0);
  Eigen::VectorXd allocation, payment;
  std::vector<double> z;
  std::vector<bool> served;
  const auto utility = [&](std::size_t i, std::size_t k, const std::vector<TypeIndex>& reports) {
    round_indices(lp, alpha, reports, allocation, payment, z, served);
    return to_double(prior.valuations[k]) * allocation[static_cast<Eigen::Index>(i)] -
           payment[static_cast<Eigen::Index>(i)];
  };
  while (true) {
    std::vector<TypeIndex> profile;
    for (std::size_t d : digits) profile.push_back(grid[d]);
    for (std::size_t i = 0; i < n; ++i) {
      if (profile[i].is_zero()) continue;
      const auto k = static_cast<std::size_t>(profile[i].k), m = static_cast<std::size_t>(profile[i].m);
      const double truthful = utility(i, k, profile);
      ++check.comparisons;
      if (truthful < -tolerance) {
        ++check.failures;
        check.worst_gain = std::max(check.worst_gain, -truthful);
      }
      for (std::size_t l = 0; l < K; ++l)
        for (std::size_t t = 0; t <= m; ++t) {
          std::vector<TypeIndex> lie = profile;
          lie[i] = {static_cast<int>(l), static_cast<int>(t)};
          const double gain = utility(i, k, lie) - truthful;
          ++check.comparisons;
          if (gain > tolerance) ++check.failures;
          check.worst_gain = std::max(check.worst_gain, gain);
        }
    }
    std::size_t pos = 0;
    while (pos < n && ++digits[pos] == grid.size()) digits[pos++] = 0;
    if (pos == n) break;
  }
  return check;
}

Prior random_prior(std::uint64_t seed, std::uint64_t index, std::size_t n, std::size_t K, std::size_t M) {
  const CounterRng rng = CounterRng(seed).split(index);
  std::uint64_t counter = 0;
  const auto pick_grid = [&](std::size_t count) {
    std::vector<int> pool{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    for (std::size_t j = 0; j < count; ++j)
      std::swap(pool[j], pool[j + rng.bits(counter++) % (pool.size() - j)]);
    std::vector<int> chosen(pool.begin(), pool.begin() + static_cast<long>(count));
    std::sort(chosen.begin(), chosen.end());
    std::vector<Rational> grid;
    for (int v : chosen) grid.emplace_back(v);
    return grid;
  };
  Prior prior;
  prior.valuations = pick_grid(K);
  prior.budgets = pick_grid(M);
  for (std::size_t i = 0; i < n; ++i) {
    BidderPrior b;
    b.probability.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(M));
    long total = 0;
    for (Eigen::Index k = 0; k < b.probability.rows(); ++k)
      for (Eigen::Index m = 0; m < b.probability.cols(); ++m) {
        const long w = 1 + static_cast<long>(rng.bits(counter++) % 10);
        b.probability(k, m) = Rational(w);
        total += w;
      }
    for (Eigen::Index k = 0; k < b.probability.rows(); ++k)
      for (Eigen::Index m = 0; m < b.probability.cols(); ++m) b.probability(k, m) /= Rational(total);
    prior.bidders.push_back(std::move(b));
  }
  prior.validate();
  return prior;
}

void write_lp_solution_csv(std::ostream& out, const Prior& prior, const LPSolution<double>& solution) {
  out << "bidder,k,m,valuation,budget,x,P\n";
  char buf[96];
  for (std::size_t i = 0; i < solution.shape.n; ++i)
    for (std::size_t k = 0; k < solution.shape.K; ++k)
      for (std::size_t m = 0; m < solution.shape.M; ++m) {
        out << i << ',' << k + 1 << ',' << m + 1 << ',' << to_string(prior.valuations[k]) << ','
            << to_string(prior.budgets[m]) << ',';
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", solution.x_at(i, k, m), solution.p_at(i, k, m));
        out << buf << '\n';
      }
}

}  // namespace clinchlab
