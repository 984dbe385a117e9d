#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "clinchlab/scenario.hpp"
#include "support.hpp"

using namespace clinchlab;
using clinchlab::testing::q;

namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = CLINCHLAB_SCENARIOS;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string scenario(const char* name) { return (kScenarios / name).string(); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("clinchlab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("parse the counterexample scenario") {
  const Scenario s = parse_scenario(scenario("discrete_underreport.json"));
  CHECK(s.profile.supply == Supply::discrete(4));
  REQUIRE(s.profile.size() == 3);
  CHECK(s.profile.bids[2].budget == 3);
  REQUIRE(s.true_types);
  CHECK((*s.true_types)[2].budget == 4);
  CHECK(s.warnings.empty());
}

TEST_CASE("parse rationals and reject malformed input") {
  const Scenario s = parse_scenario_text(R"({"supply": {"kind": "divisible"},
    "bidders": [{"valuation": 3, "budget": "17/6"}, {"valuation": "2.5", "budget": "1"}]})");
  CHECK(s.profile.bids[0].budget == q("17/6"));
  CHECK(s.profile.bids[1].valuation == q("5/2"));

  const auto code = [](std::string_view text) {
    try {
      parse_scenario_text(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::UnknownCommand;
  };
  CHECK(code(R"({"supply": {"kind": "divisible"}})") == ErrorCode::ParseError);
  CHECK(code(R"({"supply": {"kind": "divisible"}, "bidders": [{"valuation": "x", "budget": "1"}]})") ==
        ErrorCode::ParseError);
  CHECK(code("{ not json") == ErrorCode::ParseError);
  CHECK(code(R"({"supply": {"kind": "divisible"}, "bidders": []})") == ErrorCode::ValidationError);
  CHECK(code(R"({"supply": {"kind": "divisible"}, "bidders": [{"valuation": "-1", "budget": "1"}]})") ==
        ErrorCode::ValidationError);

  try {
    parse_scenario_text(R"({"bidders": [{"valuation": "1"}]})");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("budget") != std::string::npos);
  }

  const Scenario over = parse_scenario_text(R"({"supply": {"kind": "divisible"},
    "bidders": [{"valuation": "2", "budget": "2", "true_budget": "1"}]})");
  CHECK(over.warnings.size() == 1);
}

TEST_CASE("outcome files round-trip") {
  ExactOutcome o;
  o.allocation.resize(2);
  o.payment.resize(2);
  o.allocation << q("5/8"), q("3/8");
  o.payment << q("1"), q("1/2");
  std::ostringstream json;
  write_outcome_json(json, o);
  const ExactOutcome back = parse_outcome_text(json.str());
  CHECK(back.allocation == o.allocation);
  CHECK(back.payment == o.payment);
  CHECK_THROWS_AS(parse_outcome_text(R"({"allocation": ["1"]})"), Error);
}

TEST_CASE("run on the counterexample prints the 17/6 clinch") {
  const Result r = run({"run", "--scenario", scenario("discrete_underreport.json")});
  CHECK(r.code == 0);
  CHECK(r.out.find("FinalAllocation,17/6,2,1,17/6") != std::string::npos);
  CHECK(r.out.find("2,1,17/6,1/6") != std::string::npos);
}

TEST_CASE("run writes artifacts byte-identically for a fixed seed") {
  const fs::path a = scratch("a"), b = scratch("b");
  for (const fs::path& dir : {a, b})
    CHECK(run({"run", "--scenario", scenario("symmetric.json"), "--seed", "7", "--out", dir.string()}).code == 0);
  for (const char* file : {"trajectory.csv", "outcome.csv", "outcome.json", "support.csv", "realization.csv"}) {
    CAPTURE(file);
    REQUIRE(fs::exists(a / file));
    CHECK(slurp(a / file) == slurp(b / file));
  }
  CHECK(slurp(a / "support.csv") == "bidder,payment,probability\n0,1,1\n1,1,0.5\n1,0,0.5\n");

  const Result x = run({"bayes-simulate", "--scenario", scenario("myerson_prior.json"), "--samples", "2000"});
  const Result y = run({"bayes-simulate", "--scenario", scenario("myerson_prior.json"), "--samples", "2000"});
  CHECK(x.code == 0);
  CHECK(x.out == y.out);
}

TEST_CASE("seed precedence") {
  const std::string path = scenario("symmetric.json");
  CHECK(run({"run", "--scenario", path}).out.find("realization (seed 7)") != std::string::npos);
  ::setenv("CLINCHLAB_SEED", "12", 1);
  CHECK(run({"run", "--scenario", path}).out.find("realization (seed 12)") != std::string::npos);
  CHECK(run({"run", "--scenario", path, "--seed", "5"}).out.find("realization (seed 5)") != std::string::npos);
  ::unsetenv("CLINCHLAB_SEED");
}

TEST_CASE("sweep exit codes") {
  const Result divisible = run({"sweep", "--scenario", scenario("three_bidders.json"), "--tolerance", "0"});
  CHECK(divisible.code == 0);
  CHECK(divisible.out.find("verdict: holds") != std::string::npos);

  const Result discrete =
      run({"sweep", "--scenario", scenario("discrete_truthful.json"), "--bidder", "2", "--grid", "3,4"});
  CHECK(discrete.code == 0);
  CHECK(discrete.out.find("finding:") != std::string::npos);
  CHECK(discrete.out.find("3,1/6\n4,0\n") != std::string::npos);
}

TEST_CASE("check exit codes") {
  CHECK(run({"check", "--scenario", scenario("symmetric.json")}).code == 0);
  CHECK(run({"check", "--scenario", scenario("discrete_truthful.json")}).code == 0);

  const fs::path dir = scratch("check");
  std::ofstream(dir / "good.json") << R"({"allocation": ["5/8", "3/8"], "payment": ["1", "1/2"]})";
  std::ofstream(dir / "bad.json") << R"({"allocation": ["5/8", "1/4"], "payment": ["1", "1/2"]})";
  CHECK(run({"check", "--scenario", scenario("symmetric.json"), "--outcome", (dir / "good.json").string()}).code == 0);
  const Result bad =
      run({"check", "--scenario", scenario("symmetric.json"), "--outcome", (dir / "bad.json").string()});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("PO") != std::string::npos);
}

TEST_CASE("compare and bayes commands") {
  CHECK(run({"compare", "--scenario", scenario("symmetric.json"), "--dt", "1e-5"}).code == 0);
  const Result solved = run({"bayes-solve", "--scenario", scenario("myerson_prior.json")});
  CHECK(solved.code == 0);
  CHECK(solved.out.find("objective 1\n") != std::string::npos);
  CHECK(run({"bayes-solve", "--scenario", scenario("symmetric.json")}).code == 2);
}

TEST_CASE("errors exit with 2") {
  const Result unknown = run({"frobnicate"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("UnknownCommand") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"run"}).code == 2);
  CHECK(run({"run", "--scenario", "/nonexistent.json"}).code == 2);
  CHECK(run({"run", "--bogus"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}
