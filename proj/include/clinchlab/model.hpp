#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/gmp.hpp>

namespace clinchlab {

/// Exact rational used for money and quantities at the API boundary.
using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational,
                                               boost::multiprecision::et_off>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class ErrorCode {
  NegativeValue,
  EmptyProfile,
  NonPositiveSupply,
  InvalidOrder,
  WrongSupplyKind,
  NumericalFailure,
  ZeroPrice,
  DegenerateStart,
  WindowOutOfRange,
  StepTooCoarse,
  InvalidStep,
  PaymentExceedsBudget,
  InvalidDelta,
  UnnormalizedAllocation,
  PreconditionNotMet,
  SolverStall,
  ReportOffGrid,
  InvalidPrior,
  InvalidPolicy,
  ParseError,
  ValidationError,
  UnknownCommand,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Rational helpers

/// Parses "17/6", "-3", "0.125" or "1e-3" into an exact rational.
Rational parse_rational(std::string_view text);

/// Exact value of a binary double.
Rational exact_from_double(double value);

std::string to_string(const Rational& value);

inline double to_double(const Rational& value) { return value.convert_to<double>(); }
inline double to_double(double value) { return value; }

// ---------------------------------------------------------------------------
// Domain types

/// A (valuation per unit, budget) pair, either reported or true.
struct Bid {
  Rational valuation;
  Rational budget;

  friend bool operator==(const Bid&, const Bid&) = default;
};

class Supply {
 public:
  enum class Kind { Divisible, Discrete };

  static Supply divisible() { return Supply(Kind::Divisible, 1); }
  static Supply discrete(std::int64_t units) { return Supply(Kind::Discrete, units); }

  Kind kind() const noexcept { return kind_; }
  bool is_divisible() const noexcept { return kind_ == Kind::Divisible; }
  /// 1 for the divisible good, m for discrete units.
  std::int64_t units() const noexcept { return units_; }

  friend bool operator==(const Supply&, const Supply&) = default;

 private:
  Supply(Kind kind, std::int64_t units) : kind_(kind), units_(units) {}
  Kind kind_;
  std::int64_t units_;
};

/// Reported bids, the good on sale and the tie-break priority.
///
/// `order[k]` is the bidder with the k-th highest priority. It is fixed
/// independently of the reported values and used by every engine whenever a
/// rule says "the smallest index".
struct Profile {
  std::vector<Bid> bids;
  Supply supply = Supply::divisible();
  std::vector<std::size_t> order;

  std::size_t size() const noexcept { return bids.size(); }

  friend bool operator==(const Profile&, const Profile&) = default;
};

/// Fills an empty order with the identity and rejects malformed profiles.
Profile validate_profile(Profile profile);

/// rank[i] = position of bidder i in the priority order.
std::vector<std::size_t> priority_rank(const Profile& profile);

/// Utility with a distinguished minus-infinity state for budget violations.
template <typename Scalar>
class Utility {
 public:
  Utility() = default;
  static Utility finite(Scalar value) { return Utility(false, std::move(value)); }
  static Utility minus_infinity() { return Utility(true, Scalar(0)); }

  bool is_minus_infinity() const noexcept { return minus_infinity_; }

  const Scalar& value() const {
    if (minus_infinity_) throw std::logic_error("value() of a minus-infinity utility");
    return value_;
  }

  friend bool operator<(const Utility& a, const Utility& b) {
    if (a.minus_infinity_) return !b.minus_infinity_;
    if (b.minus_infinity_) return false;
    return a.value_ < b.value_;
  }
  friend bool operator==(const Utility& a, const Utility& b) {
    if (a.minus_infinity_ || b.minus_infinity_) return a.minus_infinity_ == b.minus_infinity_;
    return a.value_ == b.value_;
  }

 private:
  Utility(bool minus_infinity, Scalar value)
      : minus_infinity_(minus_infinity), value_(std::move(value)) {}
  bool minus_infinity_ = false;
  Scalar value_{0};
};

template <typename Scalar>
std::string to_string(const Utility<Scalar>& u) {
  if (u.is_minus_infinity()) return "-inf";
  if constexpr (std::is_same_v<Scalar, Rational>) {
    return to_string(u.value());
  } else {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(u.value()));
    return buf;
  }
}

/// Final allocations X_i, payments P_i and utilities against true types.
template <typename Scalar>
struct BasicOutcome {
  Vector<Scalar> allocation;
  Vector<Scalar> payment;
  Scalar stop_price{0};
  std::vector<Utility<Scalar>> utility;

  std::size_t size() const noexcept { return static_cast<std::size_t>(allocation.size()); }
};

using Outcome = BasicOutcome<double>;
using ExactOutcome = BasicOutcome<Rational>;

/// Converts every double of the outcome to the rational it denotes.
ExactOutcome to_exact(const Outcome& outcome);
Outcome to_float(const ExactOutcome& outcome);

/// u = eta * x - P when P <= beta (+ slack), otherwise minus infinity.
template <typename Scalar>
Utility<Scalar> realized_utility(const Scalar& true_valuation, const Scalar& true_budget,
                                 const Scalar& quantity, const Scalar& payment,
                                 const Scalar& slack = Scalar(0)) {
  if (payment > true_budget + slack) return Utility<Scalar>::minus_infinity();
  return Utility<Scalar>::finite(true_valuation * quantity - payment);
}

/// Fills outcome.utility against `types` (one per bidder).
void assign_utilities(Outcome& outcome, const std::vector<Bid>& types, double slack);
void assign_utilities(ExactOutcome& outcome, const std::vector<Bid>& types);

enum class NumericMode { Float64, ExactRational };

struct NumericPolicy {
  NumericMode mode = NumericMode::Float64;
  /// Relative tolerance for event roots.
  double event_epsilon = 1e-12;
  /// Tolerance for invariant assertions.
  double check_epsilon = 1e-7;

  void validate() const;
};

}  // namespace clinchlab
