#include "clinchlab/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace clinchlab {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ParseError, where + ": " + what);
}

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  const auto it = obj.find(name);
  if (it == obj.end()) fail(where, std::string("missing field '") + name + "'");
  return *it;
}

Rational rational(const json& v, const std::string& where) {
  try {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number()) return parse_rational(v.dump());
  } catch (const Error& e) {
    fail(where, e.what());
  }
  fail(where, "expected a rational as a string or number");
}

std::uint64_t unsigned_integer(const json& v, const std::string& where) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    fail(where, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

double real(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

json parse_json(std::string_view source_text, std::string_view source) {
  try {
    return json::parse(source_text.begin(), source_text.end());
  } catch (const json::parse_error& e) {
    fail(std::string(source), e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<Rational> rational_list(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array");
  std::vector<Rational> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(rational(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

Prior parse_prior(const json& p, const std::string& where) {
  Prior prior;
  prior.valuations = rational_list(field(p, "valuations", where), where + ".valuations");
  prior.budgets = rational_list(field(p, "budgets", where), where + ".budgets");
  const json& bidders = field(p, "bidders", where);
  if (!bidders.is_array()) fail(where + ".bidders", "expected an array");
  for (std::size_t i = 0; i < bidders.size(); ++i) {
    const std::string at = where + ".bidders[" + std::to_string(i) + "]";
    BidderPrior b;
    if (bidders[i].contains("kappa")) b.kappa = rational(bidders[i]["kappa"], at + ".kappa");
    const json& rows = field(bidders[i], "probabilities", at);
    if (!rows.is_array() || rows.size() != prior.K())
      fail(at + ".probabilities", "expected one row per valuation");
    b.probability.resize(static_cast<Eigen::Index>(prior.K()), static_cast<Eigen::Index>(prior.M()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::vector<Rational> row = rational_list(rows[k], at + ".probabilities[" + std::to_string(k) + "]");
      if (row.size() != prior.M()) fail(at + ".probabilities[" + std::to_string(k) + "]", "expected one entry per budget");
      for (std::size_t m = 0; m < row.size(); ++m)
        b.probability(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) = row[m];
    }
    prior.bidders.push_back(std::move(b));
  }
  prior.validate();
  return prior;
}

Bid parse_bid(const json& b, const std::string& where) {
  return Bid{rational(field(b, "valuation", where), where + ".valuation"),
             rational(field(b, "budget", where), where + ".budget")};
}

}  // namespace

Scenario parse_scenario_text(std::string_view source_text, std::string_view source) {
  const json doc = parse_json(source_text, source);
  const std::string root(source);
  if (!doc.is_object()) fail(root, "expected a JSON object");
  Scenario s;

  if (doc.contains("prior")) {
    s.prior = parse_prior(doc["prior"], root + ".prior");
    if (doc["prior"].contains("objective")) {
      const std::string obj = text(doc["prior"]["objective"], root + ".prior.objective");
      if (obj == "revenue") s.objective = Objective::Revenue;
      else if (obj == "welfare") s.objective = Objective::Welfare;
      else fail(root + ".prior.objective", "expected 'revenue' or 'welfare'");
    }
    if (doc.contains("reports")) {
      const json& reports = doc["reports"];
      if (!reports.is_array()) fail(root + ".reports", "expected an array");
      for (std::size_t i = 0; i < reports.size(); ++i)
        s.reports.push_back(parse_bid(reports[i], root + ".reports[" + std::to_string(i) + "]"));
    }
  }

  if (doc.contains("supply")) {
    const json& supply = doc["supply"];
    const std::string kind = text(field(supply, "kind", root + ".supply"), root + ".supply.kind");
    if (kind == "divisible") {
      s.profile.supply = Supply::divisible();
    } else if (kind == "discrete") {
      const std::uint64_t units = unsigned_integer(field(supply, "units", root + ".supply"), root + ".supply.units");
      if (units < 1) throw Error(ErrorCode::NonPositiveSupply, root + ".supply.units: must be at least 1");
      s.profile.supply = Supply::discrete(static_cast<std::int64_t>(units));
    } else {
      fail(root + ".supply.kind", "expected 'divisible' or 'discrete'");
    }
  }
  s.engine = s.profile.supply.is_divisible() ? EngineKind::Divisible : EngineKind::Discrete;

  if (!doc.contains("bidders")) {
    if (!s.prior) fail(root, "missing field 'bidders'");
  } else {
    const json& bidders = doc["bidders"];
    if (!bidders.is_array()) fail(root + ".bidders", "expected an array");
    std::vector<Bid> truth;
    bool any_truth = false;
    for (std::size_t i = 0; i < bidders.size(); ++i) {
      const std::string at = root + ".bidders[" + std::to_string(i) + "]";
      const Bid bid = parse_bid(bidders[i], at);
      s.profile.bids.push_back(bid);
      Bid t = bid;
      if (bidders[i].contains("true_valuation")) {
        t.valuation = rational(bidders[i]["true_valuation"], at + ".true_valuation");
        any_truth = true;
      }
      if (bidders[i].contains("true_budget")) {
        t.budget = rational(bidders[i]["true_budget"], at + ".true_budget");
        any_truth = true;
      }
      if (bid.budget > t.budget)
        s.warnings.push_back("bidder " + std::to_string(i) + " reports budget " + to_string(bid.budget) +
                             " above the true budget " + to_string(t.budget));
      truth.push_back(t);
    }
    if (any_truth) s.true_types = std::move(truth);
  }

  if (doc.contains("order")) {
    const json& order = doc["order"];
    if (!order.is_array()) fail(root + ".order", "expected an array");
    for (std::size_t k = 0; k < order.size(); ++k)
      s.profile.order.push_back(unsigned_integer(order[k], root + ".order[" + std::to_string(k) + "]"));
  }

  if (doc.contains("engine")) {
    const std::string engine = text(doc["engine"], root + ".engine");
    if (engine == "divisible") s.engine = EngineKind::Divisible;
    else if (engine == "discrete") s.engine = EngineKind::Discrete;
    else if (engine == "reference") s.engine = EngineKind::Reference;
    else fail(root + ".engine", "expected 'divisible', 'discrete' or 'reference'");
  }

  if (doc.contains("wrapper")) {
    const json& w = doc["wrapper"];
    const std::string where = root + ".wrapper";
    const std::string kind = w.is_string() ? w.get<std::string>() : text(field(w, "kind", where), where + ".kind");
    if (kind == "none") {
      s.wrapper.kind = WrapperConfig::Kind::None;
    } else if (kind == "extraction") {
      s.wrapper.kind = WrapperConfig::Kind::Extraction;
    } else if (kind == "threat") {
      s.wrapper.kind = WrapperConfig::Kind::Threat;
      if (w.is_object() && w.contains("delta")) s.wrapper.delta = rational(w["delta"], where + ".delta");
    } else if (kind == "lottery") {
      s.wrapper.kind = WrapperConfig::Kind::Lottery;
      s.wrapper.units = static_cast<std::int64_t>(unsigned_integer(field(w, "units", where), where + ".units"));
    } else {
      fail(where + ".kind", "expected 'none', 'extraction', 'threat' or 'lottery'");
    }
  }

  if (doc.contains("seed")) s.seed = unsigned_integer(doc["seed"], root + ".seed");
  if (doc.contains("dt")) s.dt = real(doc["dt"], root + ".dt");
  if (doc.contains("policy")) {
    const json& p = doc["policy"];
    const std::string where = root + ".policy";
    if (p.contains("mode")) {
      const std::string mode = text(p["mode"], where + ".mode");
      if (mode == "float64") s.policy.mode = NumericMode::Float64;
      else if (mode == "exact") s.policy.mode = NumericMode::ExactRational;
      else fail(where + ".mode", "expected 'float64' or 'exact'");
    }
    if (p.contains("event_epsilon")) s.policy.event_epsilon = real(p["event_epsilon"], where + ".event_epsilon");
    if (p.contains("check_epsilon")) s.policy.check_epsilon = real(p["check_epsilon"], where + ".check_epsilon");
    s.policy.validate();
  }

  if (doc.contains("bidders")) {
    try {
      s.profile = validate_profile(s.profile);
    } catch (const Error& e) {
      throw Error(ErrorCode::ValidationError, root + ": " + e.what());
    }
  }
  return s;
}

Scenario parse_scenario(const std::filesystem::path& path) {
  return parse_scenario_text(read_file(path), path.string());
}

ExactOutcome parse_outcome_text(std::string_view source_text, std::string_view source) {
  const json doc = parse_json(source_text, source);
  const std::string root(source);
  const std::vector<Rational> x = rational_list(field(doc, "allocation", root), root + ".allocation");
  const std::vector<Rational> p = rational_list(field(doc, "payment", root), root + ".payment");
  if (x.size() != p.size()) fail(root, "allocation and payment lengths differ");
  ExactOutcome out;
  out.allocation.resize(static_cast<Eigen::Index>(x.size()));
  out.payment.resize(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.allocation[static_cast<Eigen::Index>(i)] = x[i];
    out.payment[static_cast<Eigen::Index>(i)] = p[i];
  }
  if (doc.contains("stop_price")) out.stop_price = rational(doc["stop_price"], root + ".stop_price");
  return out;
}

ExactOutcome parse_outcome(const std::filesystem::path& path) {
  return parse_outcome_text(read_file(path), path.string());
}

namespace {

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string number(const Rational& v) { return to_string(v); }

template <typename Scalar>
void outcome_json(std::ostream& out, const BasicOutcome<Scalar>& o) {
  json doc;
  doc["allocation"] = json::array();
  doc["payment"] = json::array();
  doc["utility"] = json::array();
  for (Eigen::Index i = 0; i < o.allocation.size(); ++i) {
    doc["allocation"].push_back(number(o.allocation[i]));
    doc["payment"].push_back(number(o.payment[i]));
  }
  for (const auto& u : o.utility) doc["utility"].push_back(to_string(u));
  doc["stop_price"] = number(o.stop_price);
  out << doc.dump(2) << '\n';
}

template <typename Scalar>
void outcome_csv(std::ostream& out, const BasicOutcome<Scalar>& o) {
  out << "bidder,allocation,payment,utility\n";
  for (Eigen::Index i = 0; i < o.allocation.size(); ++i) {
    out << i << ',' << number(o.allocation[i]) << ',' << number(o.payment[i]) << ',';
    if (static_cast<std::size_t>(i) < o.utility.size()) out << to_string(o.utility[static_cast<std::size_t>(i)]);
    out << '\n';
  }
}

}  // namespace

void write_outcome_json(std::ostream& out, const ExactOutcome& outcome) { outcome_json(out, outcome); }
void write_outcome_json(std::ostream& out, const Outcome& outcome) { outcome_json(out, outcome); }
void write_outcome_csv(std::ostream& out, const ExactOutcome& outcome) { outcome_csv(out, outcome); }
void write_outcome_csv(std::ostream& out, const Outcome& outcome) { outcome_csv(out, outcome); }

}  // namespace clinchlab
