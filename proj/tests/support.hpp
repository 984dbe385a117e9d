#pragma once

#include <initializer_list>
#include <utility>

#include "clinchlab/model.hpp"

namespace clinchlab::testing {

inline Rational q(const char* text) { return parse_rational(text); }

/// Profile from (valuation, budget) pairs given as rational strings.
inline Profile divisible(std::initializer_list<std::pair<const char*, const char*>> bids) {
  Profile p;
  for (const auto& [v, b] : bids) p.bids.push_back({q(v), q(b)});
  return validate_profile(std::move(p));
}

inline Profile discrete(std::int64_t units, std::initializer_list<std::pair<const char*, const char*>> bids) {
  Profile p;
  for (const auto& [v, b] : bids) p.bids.push_back({q(v), q(b)});
  p.supply = Supply::discrete(units);
  return validate_profile(std::move(p));
}

}  // namespace clinchlab::testing
