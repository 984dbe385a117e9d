#include "clinchlab/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace clinchlab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeValue: return "NegativeValue";
    case ErrorCode::EmptyProfile: return "EmptyProfile";
    case ErrorCode::NonPositiveSupply: return "NonPositiveSupply";
    case ErrorCode::InvalidOrder: return "InvalidOrder";
    case ErrorCode::WrongSupplyKind: return "WrongSupplyKind";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::ZeroPrice: return "ZeroPrice";
    case ErrorCode::DegenerateStart: return "DegenerateStart";
    case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::StepTooCoarse: return "StepTooCoarse";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::PaymentExceedsBudget: return "PaymentExceedsBudget";
    case ErrorCode::InvalidDelta: return "InvalidDelta";
    case ErrorCode::UnnormalizedAllocation: return "UnnormalizedAllocation";
    case ErrorCode::PreconditionNotMet: return "PreconditionNotMet";
    case ErrorCode::SolverStall: return "SolverStall";
    case ErrorCode::ReportOffGrid: return "ReportOffGrid";
    case ErrorCode::InvalidPrior: return "InvalidPrior";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

Rational parse_integer(std::string_view s, std::string_view whole) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) throw Error(ErrorCode::ParseError, "not a rational: '" + std::string(whole) + "'");
  Rational r{std::string(s)};
  return negative ? Rational(0 - r) : r;
}

Rational pow10(long exponent) {
  Rational ten(10), out(1);
  for (long k = 0; k < std::labs(exponent); ++k) out *= ten;
  return exponent < 0 ? Rational(Rational(1) / out) : out;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  const std::string_view s = trim(text);
  if (s.empty()) throw Error(ErrorCode::ParseError, "empty rational");

  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const Rational num = parse_integer(trim(s.substr(0, slash)), s);
    const Rational den = parse_integer(trim(s.substr(slash + 1)), s);
    if (den == 0) throw Error(ErrorCode::ParseError, "zero denominator in '" + std::string(s) + "'");
    return num / den;
  }

  std::string_view mantissa = s;
  long exponent = 0;
  if (const auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    mantissa = s.substr(0, e);
    std::string_view exp_text = s.substr(e + 1);
    bool neg = false;
    if (!exp_text.empty() && (exp_text.front() == '-' || exp_text.front() == '+')) {
      neg = exp_text.front() == '-';
      exp_text.remove_prefix(1);
    }
    if (!all_digits(exp_text) || exp_text.size() > 6)
      throw Error(ErrorCode::ParseError, "bad exponent in '" + std::string(s) + "'");
    exponent = std::stol(std::string(exp_text));
    if (neg) exponent = -exponent;
  }

  bool negative = false;
  if (!mantissa.empty() && (mantissa.front() == '-' || mantissa.front() == '+')) {
    negative = mantissa.front() == '-';
    mantissa.remove_prefix(1);
  }
  std::string digits;
  if (const auto dot = mantissa.find('.'); dot != std::string_view::npos) {
    const std::string_view ip = mantissa.substr(0, dot);
    const std::string_view fp = mantissa.substr(dot + 1);
    if ((!ip.empty() && !all_digits(ip)) || (!fp.empty() && !all_digits(fp)) ||
        (ip.empty() && fp.empty()))
      throw Error(ErrorCode::ParseError, "not a rational: '" + std::string(s) + "'");
    digits = std::string(ip) + std::string(fp);
    exponent -= static_cast<long>(fp.size());
  } else {
    if (!all_digits(mantissa)) throw Error(ErrorCode::ParseError, "not a rational: '" + std::string(s) + "'");
    digits = std::string(mantissa);
  }
  Rational value = Rational(digits) * pow10(exponent);
  return negative ? Rational(0 - value) : value;
}

Rational exact_from_double(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NumericalFailure, "non-finite value");
  return Rational(value);
}

std::string to_string(const Rational& value) { return value.str(); }

Profile validate_profile(Profile profile) {
  if (profile.bids.empty()) throw Error(ErrorCode::EmptyProfile, "profile has no bidders");
  if (profile.supply.units() < 1) throw Error(ErrorCode::NonPositiveSupply, "supply must be positive");
  for (std::size_t i = 0; i < profile.bids.size(); ++i) {
    const Bid& bid = profile.bids[i];
    if (bid.valuation < 0 || bid.budget < 0)
      throw Error(ErrorCode::NegativeValue, "bidder " + std::to_string(i) + " has a negative value");
  }
  const std::size_t n = profile.bids.size();
  if (profile.order.empty()) {
    profile.order.resize(n);
    std::iota(profile.order.begin(), profile.order.end(), std::size_t{0});
  }
  if (profile.order.size() != n) throw Error(ErrorCode::InvalidOrder, "order length differs from bidder count");
  std::vector<bool> seen(n, false);
  for (std::size_t idx : profile.order) {
    if (idx >= n || seen[idx]) throw Error(ErrorCode::InvalidOrder, "order is not a permutation");
    seen[idx] = true;
  }
  return profile;
}

std::vector<std::size_t> priority_rank(const Profile& profile) {
  std::vector<std::size_t> rank(profile.size());
  for (std::size_t k = 0; k < profile.order.size(); ++k) rank[profile.order[k]] = k;
  return rank;
}

ExactOutcome to_exact(const Outcome& outcome) {
  ExactOutcome out;
  const auto n = outcome.allocation.size();
  out.allocation.resize(n);
  out.payment.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.allocation[i] = exact_from_double(outcome.allocation[i]);
    out.payment[i] = exact_from_double(outcome.payment[i]);
  }
  out.stop_price = exact_from_double(outcome.stop_price);
  for (const auto& u : outcome.utility) {
    out.utility.push_back(u.is_minus_infinity() ? Utility<Rational>::minus_infinity()
                                                : Utility<Rational>::finite(exact_from_double(u.value())));
  }
  return out;
}

Outcome to_float(const ExactOutcome& outcome) {
  Outcome out;
  out.allocation = outcome.allocation.unaryExpr([](const Rational& r) { return to_double(r); });
  out.payment = outcome.payment.unaryExpr([](const Rational& r) { return to_double(r); });
  out.stop_price = to_double(outcome.stop_price);
  for (const auto& u : outcome.utility) {
    out.utility.push_back(u.is_minus_infinity() ? Utility<double>::minus_infinity()
                                                : Utility<double>::finite(to_double(u.value())));
  }
  return out;
}

void assign_utilities(Outcome& outcome, const std::vector<Bid>& types, double slack) {
  outcome.utility.clear();
  for (std::size_t i = 0; i < types.size(); ++i) {
    const double beta = to_double(types[i].budget);
    outcome.utility.push_back(realized_utility(to_double(types[i].valuation), beta,
                                               outcome.allocation[static_cast<Eigen::Index>(i)],
                                               outcome.payment[static_cast<Eigen::Index>(i)],
                                               slack * std::max(1.0, beta)));
  }
}

void assign_utilities(ExactOutcome& outcome, const std::vector<Bid>& types) {
  outcome.utility.clear();
  for (std::size_t i = 0; i < types.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    outcome.utility.push_back(realized_utility(types[i].valuation, types[i].budget,
                                               outcome.allocation[idx], outcome.payment[idx]));
  }
}

void NumericPolicy::validate() const {
  if (!(event_epsilon > 0) || !(check_epsilon > 0))
    throw Error(ErrorCode::InvalidPolicy, "tolerances must be positive");
  if (!(event_epsilon < check_epsilon))
    throw Error(ErrorCode::InvalidPolicy, "event_epsilon must be below check_epsilon");
}

}  // namespace clinchlab
