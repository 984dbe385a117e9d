#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "clinchlab/bayesian.hpp"
#include "clinchlab/simplex.hpp"
#include "support.hpp"

using namespace clinchlab;
using clinchlab::testing::q;

namespace {

Prior single_type(const char* s, const char* beta, const char* kappa = "1") {
  Prior p;
  p.valuations = {q(s)};
  p.budgets = {q(beta)};
  BidderPrior b;
  b.kappa = q(kappa);
  b.probability = Matrix<Rational>::Ones(1, 1);
  p.bidders.push_back(b);
  return p;
}

Prior two_valuations(const char* f_low, const char* beta = "100") {
  Prior p;
  p.valuations = {q("1"), q("2")};
  p.budgets = {q(beta)};
  BidderPrior b;
  b.probability.resize(2, 1);
  b.probability << q(f_low), 1 - q(f_low);
  p.bidders.push_back(b);
  return p;
}

/// Solves the square system M y = r by Gauss-Jordan; empty when singular.
std::optional<Vector<Rational>> solve_square(Matrix<Rational> M, Vector<Rational> r) {
  const Eigen::Index n = M.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    while (piv < n && M(piv, c) == 0) ++piv;
    if (piv == n) return std::nullopt;
    M.row(c).swap(M.row(piv));
    std::swap(r[c], r[piv]);
    for (Eigen::Index row = 0; row < n; ++row) {
      if (row == c || M(row, c) == 0) continue;
      const Rational f = M(row, c) / M(c, c);
      M.row(row) -= f * M.row(c);
      r[row] -= f * r[c];
    }
  }
  Vector<Rational> y(n);
  for (Eigen::Index c = 0; c < n; ++c) y[c] = r[c] / M(c, c);
  return y;
}

/// Best vertex of {A x <= b, x >= 0}: every choice of n tight constraints.
Rational vertex_oracle(const LinearProgram<Rational>& lp) {
  const Eigen::Index n = lp.cols(), m = lp.rows();
  Matrix<Rational> G(m + n, n);
  Vector<Rational> h(m + n);
  G.topRows(m) = lp.A;
  h.head(m) = lp.b;
  G.bottomRows(n) = -Matrix<Rational>::Identity(n, n);
  h.tail(n).setZero();

  std::optional<Rational> best;
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(n));
  std::function<void(Eigen::Index, Eigen::Index)> choose = [&](Eigen::Index from, Eigen::Index depth) {
    if (depth == n) {
      Matrix<Rational> M(n, n);
      Vector<Rational> r(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        M.row(j) = G.row(pick[static_cast<std::size_t>(j)]);
        r[j] = h[pick[static_cast<std::size_t>(j)]];
      }
      const auto y = solve_square(M, r);
      if (!y) return;
      const Vector<Rational> slack = h - G * *y;
      for (Eigen::Index j = 0; j < slack.size(); ++j)
        if (slack[j] < 0) return;
      const Rational value = lp.c.dot(*y);
      if (!best || value > *best) best = value;
      return;
    }
    for (Eigen::Index k = from; k < m + n; ++k) {
      pick[static_cast<std::size_t>(depth)] = k;
      choose(k + 1, depth + 1);
    }
  };
  choose(0, 0);
  return *best;
}

}  // namespace

TEST_CASE("simplex on textbook programs") {
  LinearProgram<Rational> lp;
  lp.A.resize(3, 2);
  lp.A << 1, 0, 0, 2, 3, 2;
  lp.b.resize(3);
  lp.b << 4, 12, 18;
  lp.c.resize(2);
  lp.c << 3, 5;
  const SimplexResult<Rational> r = solve_simplex(lp);
  CHECK(r.objective == 36);
  CHECK(r.x[0] == 2);
  CHECK(r.x[1] == 6);
  CHECK(vertex_oracle(lp) == 36);

  // Beale's program cycles under the largest-coefficient rule.
  LinearProgram<Rational> beale;
  beale.A.resize(3, 4);
  beale.A << q("1/4"), -60, q("-1/25"), 9, q("1/2"), -90, q("-1/50"), 3, 0, 0, 1, 0;
  beale.b.resize(3);
  beale.b << 0, 0, 1;
  beale.c.resize(4);
  beale.c << q("3/4"), -150, q("1/50"), -6;
  const SimplexResult<Rational> b = solve_simplex(beale);
  CHECK(b.objective == q("1/20"));
  CHECK(b.objective == vertex_oracle(beale));
  CHECK(solve_simplex(LinearProgram<double>{beale.A.unaryExpr([](const Rational& v) { return to_double(v); }),
                                            beale.b.unaryExpr([](const Rational& v) { return to_double(v); }),
                                            beale.c.unaryExpr([](const Rational& v) { return to_double(v); })})
            .objective == doctest::Approx(0.05));
}

TEST_CASE("simplex errors") {
  LinearProgram<Rational> unbounded;
  unbounded.A = Matrix<Rational>::Zero(1, 2);
  unbounded.A(0, 0) = 1;
  unbounded.b = Vector<Rational>::Ones(1);
  unbounded.c = Vector<Rational>::Ones(2);
  CHECK_THROWS_AS(solve_simplex(unbounded), Error);

  LinearProgram<Rational> negative = unbounded;
  negative.b[0] = -1;
  CHECK_THROWS_AS(solve_simplex(negative), Error);

  LinearProgram<Rational> lp;
  lp.A = Matrix<Rational>::Identity(3, 3);
  lp.b = Vector<Rational>::Ones(3);
  lp.c = Vector<Rational>::Ones(3);
  try {
    solve_simplex(lp, 1);
    FAIL("expected SolverStall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SolverStall);
  }
}

TEST_CASE("LP shape and counts") {
  const LPInstance a = build_lp(single_type("1", "5"));
  CHECK(a.program.cols() == 2);
  CHECK(a.ic_rows == 0);
  // supply, IR, x bound, P bound
  CHECK(a.program.rows() == 4);

  const LPInstance b = build_lp(two_valuations("1/2"));
  CHECK(b.program.cols() == 4);
  CHECK(b.ic_rows == 2);

  Prior wide = random_prior(1, 0, 3, 2, 3);
  const LPInstance c = build_lp(wide);
  const std::size_t n = 3, K = 2, M = 3;
  CHECK(c.program.cols() == static_cast<Eigen::Index>(2 * n * K * M));
  CHECK(c.ic_rows == n * (K * K * M * (M + 1) / 2 - K * M));
  CHECK(c.program.rows() == static_cast<Eigen::Index>(1 + c.ic_rows + 3 * n * K * M));
  for (Eigen::Index r = 0; r < c.program.rows(); ++r) CHECK(c.program.b[r] >= 0);
}

TEST_CASE("LP optima") {
  const LPSolution<Rational> a = solve_lp<Rational>(build_lp(single_type("1", "5")));
  CHECK(a.objective == 1);
  CHECK(a.x_at(0, 0, 0) == 1);
  CHECK(a.p_at(0, 0, 0) == 1);

  CHECK(solve_lp<Rational>(build_lp(single_type("3", "2"))).objective == 2);
  CHECK(solve_lp<Rational>(build_lp(single_type("3", "10", "1/2"))).objective == q("3/2"));

  const LPInstance myerson = build_lp(two_valuations("1/2"));
  const Rational oracle = vertex_oracle(myerson.program);
  CHECK(oracle == 1);
  CHECK(solve_lp<Rational>(myerson).objective == oracle);
  CHECK(solve_lp<double>(myerson).objective == doctest::Approx(1.0));

  // Posted price max(1, 2 (1 - f)) for every split f.
  for (const char* f : {"1/10", "1/3", "1/2", "2/3", "9/10"}) {
    const LPInstance lp = build_lp(two_valuations(f));
    const Rational expect = std::max(Rational(1), 2 * (1 - q(f)));
    CHECK(vertex_oracle(lp.program) == expect);
    CHECK(solve_lp<Rational>(lp).objective == expect);
  }
  // Budgets below the high valuation.
  for (const char* beta : {"3/2", "1/2"}) {
    const LPInstance lp = build_lp(two_valuations("1/2", beta));
    CHECK(solve_lp<Rational>(lp).objective == vertex_oracle(lp.program));
  }
  CHECK(solve_lp<Rational>(build_lp(two_valuations("1/2", "3/2"))).objective == 1);

  Prior one_budget_two = single_type("2", "1");
  one_budget_two.budgets = {q("1"), q("3")};
  one_budget_two.bidders[0].probability.resize(1, 2);
  one_budget_two.bidders[0].probability << q("1/4"), q("3/4");
  const LPInstance budgets = build_lp(one_budget_two);
  CHECK(solve_lp<Rational>(budgets).objective == vertex_oracle(budgets.program));

  const LPInstance welfare = build_lp(two_valuations("1/2"), Objective::Welfare);
  CHECK(solve_lp<Rational>(welfare).objective == q("3/2"));
}

TEST_CASE("exact solutions are feasible and match floating point") {
  for (std::uint64_t k = 0; k < 10; ++k) {
    const Prior prior = random_prior(21, k, 1 + k % 3, 1 + k % 2, 1 + (k / 2) % 3);
    const LPInstance lp = build_lp(prior);
    const LPSolution<Rational> exact = solve_lp<Rational>(lp);
    Vector<Rational> z(lp.program.cols());
    z << exact.x, exact.P;
    const Vector<Rational> slack = lp.program.b - lp.program.A * z;
    for (Eigen::Index r = 0; r < slack.size(); ++r) CHECK(slack[r] >= 0);
    for (Eigen::Index j = 0; j < z.size(); ++j) CHECK(z[j] >= 0);
    CHECK(lp.program.c.dot(z) == exact.objective);
    CHECK(solve_lp<double>(lp).objective == doctest::Approx(to_double(exact.objective)).epsilon(1e-9));
    CHECK(solve_lp_auto(lp).objective == doctest::Approx(to_double(exact.objective)).epsilon(1e-15));
  }
}

TEST_CASE("rounded mechanism") {
  const double alpha = default_alpha();
  CHECK(alpha == doctest::Approx(2 + std::sqrt(2.0)));
  CHECK(1.0 / guarantee_factor(alpha) == doctest::Approx(5.83).epsilon(1e-3));
  CHECK(1.0 / guarantee_factor(alpha) == doctest::Approx(3 + 2 * std::sqrt(2.0)));

  const Prior one = single_type("1", "5");
  const LPSolution<double> sol = to_float(solve_lp<Rational>(build_lp(one)));
  const RoundedOutcome r = run_rounded_mechanism(one, sol, alpha, {{q("1"), q("5")}}, 3);
  CHECK(r.outcome.allocation[0] == doctest::Approx(1 / alpha));
  CHECK(r.outcome.payment[0] == doctest::Approx(1 / alpha));
  CHECK(r.z[0] == 1.0);
  CHECK(r.served[0]);
  CHECK(r.threat.payment_support[0].size() == 4);
  CHECK(to_double(r.threat.expected_payment[0]) == doctest::Approx(1 / alpha));

  // Four bidders each taking 1/alpha: the fourth finds z < 1/alpha.
  Prior four = one;
  four.bidders.assign(4, one.bidders[0]);
  LPSolution<double> full;
  full.shape = {4, 1, 1};
  full.x = Eigen::VectorXd::Ones(4);
  full.P = Eigen::VectorXd::Ones(4);
  const std::vector<Bid> reports(4, Bid{q("1"), q("5")});
  const RoundedOutcome blocked = run_rounded_mechanism(four, full, alpha, reports, 1);
  CHECK(blocked.served == std::vector<bool>{true, true, true, false});
  CHECK(blocked.outcome.allocation[3] == 0.0);
  CHECK(blocked.outcome.payment[3] == 0.0);
  CHECK(blocked.outcome.allocation.sum() <= 1.0);

  CHECK(locate_report(one, {q("0"), q("5")}).is_zero());
  CHECK_THROWS_AS(locate_report(one, {q("7"), q("5")}), Error);
  CHECK_THROWS_AS(run_rounded_mechanism(one, sol, 2.0, {{q("1"), q("5")}}, 3), Error);

  // Over-reporting the budget is exposed to the threat.
  const RandomizedOutcome over =
      threat_wrap(to_exact(r.outcome), {{q("1"), q("5")}}, q("1/10"), std::vector<Bid>{{q("1"), q("2")}});
  CHECK(over.expected_utility[0].is_minus_infinity());
}

TEST_CASE("ex-post allocations never exceed the supply") {
  const double alpha = default_alpha();
  for (std::uint64_t k = 0; k < 5; ++k) {
    const Prior prior = random_prior(4, k, 3, 2, 2);
    const LPSolution<double> sol = solve_lp_auto(build_lp(prior));
    Eigen::VectorXd x, p;
    std::vector<double> z;
    std::vector<bool> served;
    for (std::uint64_t s = 0; s < 2000; ++s) {
      round_indices(sol, alpha, sample_types(prior, 9, s), x, p, z, served);
      CHECK(x.sum() <= 1.0 + 1e-12);
      CHECK((p.array() >= 0).all());
    }
  }
}

TEST_CASE("guarantee estimate") {
  const double alpha = default_alpha();
  const Prior one = two_valuations("1/2");
  const LPSolution<double> sol = solve_lp_auto(build_lp(one));
  const GuaranteeEstimate g = estimate_guarantee(one, sol, alpha, 20000, 5);
  CHECK(g.served_rate[0] == 1.0);
  CHECK(g.served_radius[0] == 0.0);
  CHECK(g.revenue >= g.revenue_bound - 3 * g.revenue_radius);
  CHECK(g.revenue <= g.lp_value + 3 * g.revenue_radius);

  const GuaranteeEstimate again = estimate_guarantee(one, sol, alpha, 20000, 5);
  CHECK(again.revenue == g.revenue);
  CHECK_THROWS_AS(estimate_guarantee(one, sol, alpha, 0, 5), Error);
}

TEST_CASE("exhaustive IC on small priors") {
  for (std::uint64_t k = 0; k < 6; ++k) {
    const Prior prior = random_prior(12, k, 1 + k % 2, 2, 2);
    const ICCheck c = exhaustive_ic_check(prior, solve_lp_auto(build_lp(prior)), default_alpha());
    CHECK(c.comparisons > 0);
    CHECK(c.failures == 0);
  }
}

TEST_CASE("prior validation") {
  Prior p = two_valuations("1/2");
  p.bidders[0].probability(0, 0) = q("1/3");
  CHECK_THROWS_AS(p.validate(), Error);
  p = two_valuations("1/2");
  p.valuations = {q("2"), q("1")};
  CHECK_THROWS_AS(p.validate(), Error);
  p = two_valuations("1/2");
  p.bidders[0].kappa = q("3/2");
  CHECK_THROWS_AS(p.validate(), Error);
  p = two_valuations("1/2");
  p.bidders.clear();
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK_NOTHROW(random_prior(2, 2, 3, 3, 3).validate());
}

TEST_CASE("solution csv") {
  const Prior one = single_type("1", "5");
  std::ostringstream out;
  write_lp_solution_csv(out, one, to_float(solve_lp<Rational>(build_lp(one))));
  CHECK(out.str() == "bidder,k,m,valuation,budget,x,P\n0,1,1,1,5,1,1\n");
}
