#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clinchlab/bayesian.hpp"
#include "clinchlab/model.hpp"

namespace clinchlab {

enum class EngineKind { Divisible, Discrete, Reference };

struct WrapperConfig {
  enum class Kind { None, Extraction, Threat, Lottery };
  Kind kind = Kind::None;
  Rational delta{1, 10};
  std::int64_t units = 1;
};

/// A parsed experiment description. Money fields are exact rationals.
struct Scenario {
  Profile profile;
  std::optional<std::vector<Bid>> true_types;
  EngineKind engine = EngineKind::Divisible;
  WrapperConfig wrapper;
  std::optional<std::uint64_t> seed;
  NumericPolicy policy;
  double dt = 1e-6;
  std::optional<Prior> prior;
  Objective objective = Objective::Revenue;
  std::vector<Bid> reports;
  /// Non-fatal findings, e.g. reported budgets above true budgets.
  std::vector<std::string> warnings;

  /// True types when given, else the reported bids.
  const std::vector<Bid>& types() const { return true_types ? *true_types : profile.bids; }
};

/// Throws ParseError (with line or field) on malformed input and
/// ValidationError when the profile is rejected.
Scenario parse_scenario_text(std::string_view text, std::string_view source = "<input>");
Scenario parse_scenario(const std::filesystem::path& path);

/// {"allocation": [...], "payment": [...]} with rational strings or numbers.
ExactOutcome parse_outcome_text(std::string_view text, std::string_view source = "<input>");
ExactOutcome parse_outcome(const std::filesystem::path& path);

void write_outcome_json(std::ostream& out, const ExactOutcome& outcome);
void write_outcome_json(std::ostream& out, const Outcome& outcome);
/// bidder,allocation,payment,utility
void write_outcome_csv(std::ostream& out, const ExactOutcome& outcome);
void write_outcome_csv(std::ostream& out, const Outcome& outcome);

}  // namespace clinchlab
