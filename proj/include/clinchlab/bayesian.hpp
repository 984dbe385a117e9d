#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "clinchlab/model.hpp"
#include "clinchlab/randomization.hpp"
#include "clinchlab/simplex.hpp"

namespace clinchlab {

/// Per-bidder type distribution over the positive grid points:
/// probability(k, m) = Pr[v = s_k, B = beta_m].
struct BidderPrior {
  Rational kappa{1};
  Matrix<Rational> probability;
};

/// Independent discrete priors on a shared grid. `valuations` and `budgets`
/// hold the positive points s_1 < ... < s_K and beta_1 < ... < beta_M; the
/// zero type is implicit.
struct Prior {
  std::vector<Rational> valuations;
  std::vector<Rational> budgets;
  std::vector<BidderPrior> bidders;

  std::size_t size() const noexcept { return bidders.size(); }
  std::size_t K() const noexcept { return valuations.size(); }
  std::size_t M() const noexcept { return budgets.size(); }

  /// Throws InvalidPrior on unsorted grids, negative or unnormalized
  /// probabilities, kappa outside [0, 1] or mismatched shapes.
  void validate() const;
};

enum class Objective { Revenue, Welfare };

/// Variable layout: x_ikm at index ((i K + k) M + m), P_ikm after all x.
struct LPShape {
  std::size_t n = 0, K = 0, M = 0;

  std::size_t per_kind() const noexcept { return n * K * M; }
  std::size_t x_index(std::size_t i, std::size_t k, std::size_t m) const noexcept { return (i * K + k) * M + m; }
  std::size_t p_index(std::size_t i, std::size_t k, std::size_t m) const noexcept {
    return per_kind() + x_index(i, k, m);
  }
};

struct LPInstance {
  LPShape shape;
  Objective objective = Objective::Revenue;
  LinearProgram<Rational> program;
  std::size_t ic_rows = 0;
  std::size_t nonzeros = 0;
};

/// Supply in expectation, IC against every (l, t) with t <= m, IR and the
/// bounds x <= kappa, P <= beta_m, all as rows of A z <= b.
LPInstance build_lp(const Prior& prior, Objective objective = Objective::Revenue);

template <typename Scalar>
struct LPSolution {
  LPShape shape;
  Vector<Scalar> x;
  Vector<Scalar> P;
  Scalar objective{0};
  std::size_t pivots = 0;

  const Scalar& x_at(std::size_t i, std::size_t k, std::size_t m) const {
    return x[static_cast<Eigen::Index>(shape.x_index(i, k, m))];
  }
  const Scalar& p_at(std::size_t i, std::size_t k, std::size_t m) const {
    return P[static_cast<Eigen::Index>(shape.x_index(i, k, m))];
  }
};

template <typename Scalar>
LPSolution<Scalar> solve_lp(const LPInstance& lp);

extern template LPSolution<double> solve_lp<double>(const LPInstance&);
extern template LPSolution<Rational> solve_lp<Rational>(const LPInstance&);

/// Rational pivoting below `rational_limit` nonzeros, floating point above.
/// Exact solutions are converted to double on return.
LPSolution<double> solve_lp_auto(const LPInstance& lp, std::size_t rational_limit = 10000);

LPSolution<double> to_float(const LPSolution<Rational>& solution);

/// 2 + sqrt(2), the minimizer of alpha (alpha - 1) / (alpha - 2).
double default_alpha();
/// (alpha - 2) / (alpha (alpha - 1)): the fraction of the LP value retained.
double guarantee_factor(double alpha);

/// Grid position of one report; (-1, -1) denotes the zero type.
struct TypeIndex {
  int k = -1;
  int m = -1;
  bool is_zero() const noexcept { return k < 0 || m < 0; }
};

/// Maps reported (s, beta) to grid indices. A zero valuation or budget is the
/// zero type; anything else off the grid throws ReportOffGrid.
TypeIndex locate_report(const Prior& prior, const Bid& report);

struct RoundedOutcome {
  /// Scaled allocation and payment before the Threat.
  Outcome outcome;
  std::vector<double> z;
  std::vector<bool> served;
  /// Threat distribution over the scaled outcome and one sampled draw.
  RandomizedOutcome threat;
  Realization realized;
};

/// Sequential alpha-rounding in the prior's bidder order followed by the
/// Threat with probability `delta`.
RoundedOutcome run_rounded_mechanism(const Prior& prior, const LPSolution<double>& lp, double alpha,
                                     const std::vector<Bid>& reports, std::uint64_t seed,
                                     const Rational& delta = Rational(1, 10));

/// The deterministic part of the rounding, on grid indices.
void round_indices(const LPSolution<double>& lp, double alpha, const std::vector<TypeIndex>& types,
                   Eigen::VectorXd& allocation, Eigen::VectorXd& payment, std::vector<double>& z,
                   std::vector<bool>& served);

struct GuaranteeEstimate {
  std::size_t samples = 0;
  double lp_value = 0.0;
  double alpha = 0.0;
  /// Mean realized revenue, taking the Threat at its (zero) mean.
  double revenue = 0.0;
  double revenue_radius = 0.0;
  std::vector<double> served_rate;
  std::vector<double> served_radius;
  /// Bounds the estimates are compared against.
  double revenue_bound = 0.0;
  double served_bound = 0.0;
};

/// Monte Carlo over i.i.d. type profiles drawn from the prior. Radii are one
/// standard error; sample s uses stream s of the seed.
GuaranteeEstimate estimate_guarantee(const Prior& prior, const LPSolution<double>& lp, double alpha,
                                     std::size_t samples, std::uint64_t seed);

/// Draws one type profile (grid indices) for sample `s`.
std::vector<TypeIndex> sample_types(const Prior& prior, std::uint64_t seed, std::uint64_t s);

struct ICCheck {
  std::size_t comparisons = 0;
  std::size_t failures = 0;
  double worst_gain = 0.0;
};

/// For every bidder, every true type (k, m), every report profile of the
/// others and every misreport (l, t) with t <= m: the truthful scaled
/// utility is at least the misreport's, and at least zero.
ICCheck exhaustive_ic_check(const Prior& prior, const LPSolution<double>& lp, double alpha,
                            double tolerance = 1e-9);

/// Random prior with n bidders, K valuations and M budgets on integer grids
/// in [1, 10], kappa = 1 and rational probabilities with denominators <= 10K M.
Prior random_prior(std::uint64_t seed, std::uint64_t index, std::size_t n, std::size_t K, std::size_t M);

/// bidder,k,m,valuation,budget,x,P
void write_lp_solution_csv(std::ostream& out, const Prior& prior, const LPSolution<double>& solution);

}  // namespace clinchlab
