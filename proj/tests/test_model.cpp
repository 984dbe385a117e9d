#include <doctest.h>

#include <functional>

#include "clinchlab/model.hpp"
#include "support.hpp"

using namespace clinchlab;
using clinchlab::testing::q;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::UnknownCommand;
}

}  // namespace

TEST_CASE("parse_rational accepts fractions, integers and decimals") {
  CHECK(parse_rational("17/6") == Rational(17, 6));
  CHECK(parse_rational(" -3 ") == Rational(-3));
  CHECK(parse_rational("0.125") == Rational(1, 8));
  CHECK(parse_rational("1e-3") == Rational(1, 1000));
  CHECK(parse_rational("2.5E2") == Rational(250));
  CHECK(parse_rational("6/4") == Rational(3, 2));
  CHECK(to_string(Rational(17, 6)) == "17/6");
  CHECK(to_string(Rational(4)) == "4");
}

TEST_CASE("parse_rational rejects garbage") {
  CHECK(code_of([] { parse_rational(""); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_rational("1/0"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_rational("abc"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_rational("1.2.3"); }) == ErrorCode::ParseError);
}

TEST_CASE("exact_from_double is the binary value") {
  CHECK(exact_from_double(0.5) == Rational(1, 2));
  CHECK(exact_from_double(0.1) != Rational(1, 10));
  CHECK(to_double(exact_from_double(0.1)) == 0.1);
  CHECK(code_of([] { exact_from_double(std::nan("")); }) == ErrorCode::NumericalFailure);
}

TEST_CASE("validate_profile") {
  Profile p;
  CHECK(code_of([&] { validate_profile(p); }) == ErrorCode::EmptyProfile);

  p.bids = {{q("2"), q("1")}, {q("3"), q("-1")}};
  CHECK(code_of([&] { validate_profile(p); }) == ErrorCode::NegativeValue);

  p.bids[1].budget = q("1");
  const Profile ok = validate_profile(p);
  CHECK(ok.order == std::vector<std::size_t>{0, 1});

  p.order = {1, 1};
  CHECK(code_of([&] { validate_profile(p); }) == ErrorCode::InvalidOrder);
  p.order = {0};
  CHECK(code_of([&] { validate_profile(p); }) == ErrorCode::InvalidOrder);

  p.order = {1, 0};
  CHECK(priority_rank(validate_profile(p)) == std::vector<std::size_t>{1, 0});

  p.order.clear();
  p.supply = Supply::discrete(0);
  CHECK(code_of([&] { validate_profile(p); }) == ErrorCode::NonPositiveSupply);
}

TEST_CASE("utility ordering and sentinel") {
  const auto ninf = Utility<double>::minus_infinity();
  const auto zero = Utility<double>::finite(0.0);
  CHECK(ninf < zero);
  CHECK_FALSE(zero < ninf);
  CHECK(ninf == Utility<double>::minus_infinity());
  CHECK(to_string(ninf) == "-inf");
  CHECK_THROWS_AS(ninf.value(), std::logic_error);

  CHECK(realized_utility(3.0, 1.0, 1.0, 1.5).is_minus_infinity());
  CHECK(realized_utility(3.0, 1.0, 1.0, 1.0 + 1e-12, 1e-9).value() == doctest::Approx(2.0));
  CHECK(realized_utility(Rational(3), Rational(4), Rational(1), Rational(17, 6)).value() == Rational(1, 6));
}

TEST_CASE("outcome conversions round-trip") {
  Outcome o;
  o.allocation = Eigen::VectorXd::Constant(2, 0.375);
  o.payment = Eigen::VectorXd::Constant(2, 0.5);
  o.stop_price = 2.0;
  const ExactOutcome e = to_exact(o);
  CHECK(e.allocation[0] == Rational(3, 8));
  const Outcome back = to_float(e);
  CHECK(back.payment[1] == 0.5);
  CHECK(back.stop_price == 2.0);
}

TEST_CASE("numeric policy validation") {
  NumericPolicy policy;
  CHECK_NOTHROW(policy.validate());
  policy.check_epsilon = 0;
  CHECK(code_of([&] { policy.validate(); }) == ErrorCode::InvalidPolicy);
  policy.check_epsilon = 1e-13;
  CHECK(code_of([&] { policy.validate(); }) == ErrorCode::InvalidPolicy);
}
