#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "clinchlab/bayesian.hpp"
#include "clinchlab/discrete.hpp"
#include "clinchlab/divisible.hpp"
#include "clinchlab/property_lab.hpp"
#include "clinchlab/randomization.hpp"
#include "clinchlab/reference.hpp"
#include "clinchlab/scenario.hpp"

namespace clinchlab::cli {

namespace {

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> alpha;
  std::optional<std::string> delta;
  std::size_t samples = 100000;
  std::string out_dir;
  std::string grid;
  std::optional<std::size_t> bidder;
  std::optional<double> tolerance;
  std::string outcome;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

class Context {
 public:
  Context(Options options, std::ostream& out, std::ostream& err)
      : opt_(std::move(options)), out_(out), err_(err) {}

  const Scenario& scenario() {
    if (!scenario_) {
      if (opt_.scenario.empty()) throw Error(ErrorCode::ValidationError, "--scenario is required");
      scenario_ = parse_scenario(opt_.scenario);
      for (const std::string& w : scenario_->warnings) err_ << "warning: " << w << '\n';
    }
    return *scenario_;
  }

  std::uint64_t seed() {
    if (opt_.seed) return *opt_.seed;
    if (const char* env = std::getenv("CLINCHLAB_SEED"); env && *env) {
      try {
        return std::stoull(env);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ValidationError, "CLINCHLAB_SEED is not a number");
      }
    }
    return scenario().seed.value_or(0);
  }

  const Options& options() const { return opt_; }
  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }

  /// Prints `title` and `body` to stdout and, with --out, writes `file`.
  void artifact(const std::string& title, const std::string& file, const std::string& body) {
    out_ << "# " << title << '\n' << body;
    if (opt_.out_dir.empty()) return;
    std::filesystem::create_directories(opt_.out_dir);
    std::ofstream f(std::filesystem::path(opt_.out_dir) / file, std::ios::binary);
    if (!f) throw Error(ErrorCode::ValidationError, "cannot write " + file + " in " + opt_.out_dir);
    f << body;
  }

 private:
  Options opt_;
  std::ostream& out_;
  std::ostream& err_;
  std::optional<Scenario> scenario_;
};

template <typename Writer>
std::string render(Writer&& write) {
  std::ostringstream s;
  write(s);
  return s.str();
}

std::string describe_violations(const std::vector<Violation>& violations) {
  std::ostringstream s;
  if (violations.empty()) s << "all properties hold\n";
  for (const Violation& v : violations) {
    s << to_string(v.property);
    if (v.bidder) s << " bidder " << *v.bidder;
    s << ": " << v.detail << '\n';
  }
  return s.str();
}

Rational delta_of(Context& ctx) {
  return ctx.options().delta ? parse_rational(*ctx.options().delta) : ctx.scenario().wrapper.delta;
}

void emit_randomized(Context& ctx, const RandomizedOutcome& r, bool exact) {
  ctx.artifact("payment support", "support.csv", render([&](std::ostream& s) { write_support_csv(s, r, exact); }));
  const Realization draw = sample(r, ctx.seed());
  ctx.artifact("realization (seed " + std::to_string(draw.seed) + ")", "realization.csv", render([&](std::ostream& s) {
                 s << "bidder,payment,expected_payment,expected_utility\n";
                 for (std::size_t i = 0; i < r.size(); ++i)
                   s << i << ',' << format_money(draw.payment[i], exact) << ','
                     << format_money(r.expected_payment[i], exact) << ','
                     << (r.expected_utility[i].is_minus_infinity()
                             ? std::string("-inf")
                             : format_money(r.expected_utility[i].value(), exact))
                     << '\n';
               }));
}

int cmd_run(Context& ctx) {
  const Scenario& sc = ctx.scenario();
  const WrapperConfig& wrapper = sc.wrapper;

  if (wrapper.kind == WrapperConfig::Kind::Lottery) {
    Profile scaled = sc.profile;
    for (Bid& b : scaled.bids) b.valuation *= Rational(wrapper.units);
    const DivisibleRun run = run_divisible(scaled, std::nullopt, sc.policy);
    const LotteryDraw draw = unit_lottery(run.outcome, sc.profile.bids, wrapper.units, ctx.seed(), 0,
                                          sc.policy.check_epsilon);
    ctx.artifact("lottery (seed " + std::to_string(draw.seed) + ")", "lottery.csv", render([&](std::ostream& s) {
                   s << "bidder,probability,winner\n";
                   for (std::size_t i = 0; i < draw.winner_probability.size(); ++i)
                     s << i << ',' << to_string(draw.winner_probability[i]) << ',' << (i == draw.winner) << '\n';
                 }));
    ctx.artifact("outcome", "outcome.csv", render([&](std::ostream& s) { write_outcome_csv(s, draw.outcome); }));
    return Ok;
  }

  ExactOutcome exact;
  if (sc.engine == EngineKind::Discrete) {
    const DiscreteRun run = run_discrete(sc.profile, sc.true_types);
    ctx.artifact("events", "events.csv", render([&](std::ostream& s) { write_discrete_events_csv(s, run.events); }));
    ctx.artifact("outcome", "outcome.csv", render([&](std::ostream& s) { write_outcome_csv(s, run.outcome); }));
    if (!ctx.options().out_dir.empty())
      ctx.artifact("outcome json", "outcome.json", render([&](std::ostream& s) { write_outcome_json(s, run.outcome); }));
    exact = run.outcome;
  } else {
    Outcome outcome;
    if (sc.engine == EngineKind::Reference) {
      outcome = integrate_fixed_step(sc.profile, ctx.options().dt.value_or(sc.dt));
      assign_utilities(outcome, sc.types(), sc.policy.check_epsilon);
    } else {
      const DivisibleRun run = run_divisible(sc.profile, sc.true_types, sc.policy);
      ctx.artifact("trajectory", "trajectory.csv",
                   render([&](std::ostream& s) { write_trajectory_csv(s, run.trajectory); }));
      outcome = run.outcome;
    }
    ctx.artifact("outcome", "outcome.csv", render([&](std::ostream& s) { write_outcome_csv(s, outcome); }));
    if (!ctx.options().out_dir.empty())
      ctx.artifact("outcome json", "outcome.json", render([&](std::ostream& s) { write_outcome_json(s, outcome); }));
    exact = to_exact(outcome);
    for (Eigen::Index i = 0; i < exact.payment.size(); ++i) {
      const Rational& budget = sc.profile.bids[static_cast<std::size_t>(i)].budget;
      if (exact.payment[i] > budget && to_double(exact.payment[i] - budget) <= sc.policy.check_epsilon)
        exact.payment[i] = budget;
    }
  }

  const bool rational = sc.engine == EngineKind::Discrete;
  if (wrapper.kind == WrapperConfig::Kind::Extraction)
    emit_randomized(ctx, randomized_extraction(exact, sc.profile.bids, sc.true_types), rational);
  else if (wrapper.kind == WrapperConfig::Kind::Threat)
    emit_randomized(ctx, threat_wrap(exact, sc.profile.bids, delta_of(ctx), sc.true_types), rational);
  return Ok;
}

std::vector<Rational> parse_grid(const std::string& text) {
  std::vector<Rational> grid;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ','))
    if (!item.empty()) grid.push_back(parse_rational(item));
  return grid;
}

int cmd_sweep(Context& ctx) {
  const Scenario& sc = ctx.scenario();
  const std::size_t bidder = ctx.options().bidder.value_or(sc.profile.size() - 1);
  if (bidder >= sc.profile.size()) throw Error(ErrorCode::ValidationError, "--bidder out of range");
  std::vector<Rational> grid = parse_grid(ctx.options().grid);
  if (grid.empty()) grid = even_grid(sc.types()[bidder].budget, 20);

  SweepOptions options;
  options.policy = sc.policy;
  options.tolerance = ctx.options().tolerance.value_or(1e-7);
  const SweepReport report = monotonicity_sweep(sc.profile, bidder, grid, options);
  ctx.artifact("sweep", "sweep.csv", render([&](std::ostream& s) { write_sweep_csv(s, report); }));
  ctx.artifact("report", "sweep.txt", describe(report));

  const bool divisible = sc.profile.supply.is_divisible();
  if (!divisible && report.verdict == SweepReport::Verdict::Violated)
    ctx.out() << "finding: the discrete auction is not budget monotone on this instance\n";
  const bool failed =
      !report.invariant_violations.empty() || (divisible && report.verdict == SweepReport::Verdict::Violated);
  return failed ? PropertyViolation : Ok;
}

int cmd_check(Context& ctx) {
  const Scenario& sc = ctx.scenario();
  std::vector<Violation> violations;
  if (!ctx.options().outcome.empty()) {
    const ExactOutcome given = parse_outcome(ctx.options().outcome);
    violations = sc.profile.supply.is_divisible()
                     ? check_outcome(sc.profile, sc.types(), to_float(given), sc.policy.check_epsilon)
                     : check_outcome(sc.profile, sc.types(), given);
  } else if (sc.profile.supply.is_divisible()) {
    const DivisibleRun run = run_divisible(sc.profile, sc.true_types, sc.policy);
    violations = check_outcome(sc.profile, sc.types(), run.outcome, sc.policy.check_epsilon);
    for (Violation& v : check_trajectory(sc.profile, run.trajectory, sc.policy.check_epsilon))
      violations.push_back(std::move(v));
  } else {
    violations = check_outcome(sc.profile, sc.types(), run_discrete(sc.profile, sc.true_types).outcome);
  }
  ctx.artifact("check", "check.txt", describe_violations(violations));
  return violations.empty() ? Ok : PropertyViolation;
}

int cmd_compare(Context& ctx) {
  const Scenario& sc = ctx.scenario();
  const double dt = ctx.options().dt.value_or(sc.dt);
  const double limit = ctx.options().tolerance.value_or(1e-4);
  const EngineComparison c = compare_engines(sc.profile, dt, sc.policy);
  ctx.artifact("comparison", "compare.csv", render([&](std::ostream& s) {
                 s << "dt,allocation_deviation,payment_deviation\n"
                   << fmt(dt) << ',' << fmt(c.allocation_deviation) << ',' << fmt(c.payment_deviation) << '\n';
               }));
  return c.max_deviation() <= limit ? Ok : PropertyViolation;
}

const Prior& prior_of(Context& ctx) {
  const Scenario& sc = ctx.scenario();
  if (!sc.prior) throw Error(ErrorCode::InvalidPrior, "scenario has no 'prior' section");
  return *sc.prior;
}

LPSolution<double> solve(Context& ctx, const LPInstance& lp, std::string& exact_objective) {
  if (ctx.scenario().policy.mode == NumericMode::ExactRational || lp.nonzeros < 10000) {
    const LPSolution<Rational> exact = solve_lp<Rational>(lp);
    exact_objective = to_string(exact.objective);
    return to_float(exact);
  }
  const LPSolution<double> sol = solve_lp<double>(lp);
  exact_objective = fmt(sol.objective);
  return sol;
}

int cmd_bayes_solve(Context& ctx) {
  const Prior& prior = prior_of(ctx);
  const LPInstance lp = build_lp(prior, ctx.scenario().objective);
  std::string objective;
  const LPSolution<double> sol = solve(ctx, lp, objective);
  ctx.artifact("lp", "lp_summary.txt", render([&](std::ostream& s) {
                 s << "variables " << lp.program.cols() << "\nconstraints " << lp.program.rows() << "\nic_rows "
                   << lp.ic_rows << "\nnonzeros " << lp.nonzeros << "\npivots " << sol.pivots << "\nobjective "
                   << objective << '\n';
               }));
  ctx.artifact("lp solution", "lp_solution.csv",
               render([&](std::ostream& s) { write_lp_solution_csv(s, prior, sol); }));
  return Ok;
}

int cmd_bayes_simulate(Context& ctx) {
  const Prior& prior = prior_of(ctx);
  const LPInstance lp = build_lp(prior, ctx.scenario().objective);
  std::string objective;
  const LPSolution<double> sol = solve(ctx, lp, objective);
  const double alpha = ctx.options().alpha.value_or(default_alpha());
  const std::uint64_t seed = ctx.seed();
  const GuaranteeEstimate g = estimate_guarantee(prior, sol, alpha, ctx.options().samples, seed);

  bool ok = g.revenue >= g.revenue_bound - 3.0 * g.revenue_radius;
  ctx.artifact("guarantee", "guarantee.txt", render([&](std::ostream& s) {
                 s << "lp_objective " << objective << "\nalpha " << fmt(alpha) << "\nsamples " << g.samples
                   << "\nseed " << seed << "\nrevenue " << fmt(g.revenue) << "\nrevenue_radius "
                   << fmt(g.revenue_radius) << "\nrevenue_bound " << fmt(g.revenue_bound) << '\n';
                 for (std::size_t i = 0; i < g.served_rate.size(); ++i) {
                   s << "served_rate " << i << ' ' << fmt(g.served_rate[i]) << " radius " << fmt(g.served_radius[i])
                     << " bound " << fmt(g.served_bound) << '\n';
                   ok = ok && g.served_rate[i] >= g.served_bound - g.served_radius[i];
                 }
               }));

  const Scenario& sc = ctx.scenario();
  if (!sc.reports.empty()) {
    const Rational delta = ctx.options().delta ? parse_rational(*ctx.options().delta) : sc.wrapper.delta;
    const RoundedOutcome r = run_rounded_mechanism(prior, sol, alpha, sc.reports, seed, delta);
    ctx.artifact("rounded outcome", "rounded.csv", render([&](std::ostream& s) {
                   s << "bidder,z,served,allocation,payment,realized_payment\n";
                   for (std::size_t i = 0; i < r.z.size(); ++i)
                     s << i << ',' << fmt(r.z[i]) << ',' << r.served[i] << ','
                       << fmt(r.outcome.allocation[static_cast<Eigen::Index>(i)]) << ','
                       << fmt(r.outcome.payment[static_cast<Eigen::Index>(i)]) << ','
                       << format_money(r.realized.payment[i], false) << '\n';
                 }));
  }
  return ok ? Ok : PropertyViolation;
}

const std::map<std::string, std::function<int(Context&)>>& commands() {
  static const std::map<std::string, std::function<int(Context&)>> table{
      {"run", cmd_run},         {"sweep", cmd_sweep},
      {"check", cmd_check},     {"compare", cmd_compare},
      {"bayes-solve", cmd_bayes_solve}, {"bayes-simulate", cmd_bayes_simulate},
  };
  return table;
}

constexpr const char* kUsage =
    "usage: clinchlab <run|sweep|check|compare|bayes-solve|bayes-simulate> --scenario PATH [options]\n";

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    (args.empty() ? err : out) << kUsage;
    return args.empty() ? Failure : Ok;
  }
  const auto command = commands().find(args[0]);
  if (command == commands().end()) {
    err << "error: " << to_string(ErrorCode::UnknownCommand) << ": '" << args[0] << "'\n" << kUsage;
    return Failure;
  }

  Options opt;
  CLI::App app{"clinchlab " + args[0]};
  app.add_option("--scenario", opt.scenario, "Scenario JSON file");
  app.add_option("--seed", opt.seed, "Random seed (falls back to CLINCHLAB_SEED, then the scenario)");
  app.add_option("--dt", opt.dt, "Fixed step for the reference integrator");
  app.add_option("--alpha", opt.alpha, "Rounding scale, > 2");
  app.add_option("--delta", opt.delta, "Threat probability in (0, 1)");
  app.add_option("--samples", opt.samples, "Monte Carlo samples");
  app.add_option("--out", opt.out_dir, "Directory for artifacts");
  app.add_option("--grid", opt.grid, "Comma-separated budget grid");
  app.add_option("--bidder", opt.bidder, "Bidder index for sweeps");
  app.add_option("--tolerance", opt.tolerance, "Sweep or comparison tolerance");
  app.add_option("--outcome", opt.outcome, "Outcome JSON to check");

  std::vector<std::string> rest(args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return Ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << to_string(ErrorCode::ParseError) << ": " << e.what() << '\n';
    return Failure;
  }

  Context ctx(std::move(opt), out, err);
  try {
    return command->second(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return Failure;
}

}  // namespace clinchlab::cli
