#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "lambda_lqg/errors.hpp"
#include "lambda_lqg/scenario.hpp"

namespace {

using namespace lambda_lqg;

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kSynthesis = 3, kOrdering = 4 };

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  std::vector<std::string> arch;
  std::string param;
  std::vector<double> grid;
  bool monte_carlo = false;
};

void configure_logging() {
  auto level = spdlog::level::info;
  if (const char* env = std::getenv("LAMBDA_LQG_LOG")) {
    level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only accept it when asked for.
    if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::info;
  }
  spdlog::set_level(level);
  spdlog::set_pattern("[%l] %v");
}

Scenario load(const Options& o) {
  Scenario s = load_scenario(o.config);
  if (o.seed_set) s.base_seed = o.seed;
  if (!o.arch.empty()) s.architectures = o.arch;
  validate_scenario(s);
  spdlog::debug("scenario '{}' loaded from {}", s.name, o.config);
  return s;
}

int cmd_validate(const Options& o) {
  const Scenario s = load(o);
  const ScenarioModel m = build_scenario(s);
  spdlog::info("scenario '{}' is valid: d1 = {}, d2 = {}, {} states", s.name, m.delays.d1, m.delays.d2,
               m.plant.realization.states());
  return kOk;
}

int cmd_run(const Options& o) {
  const Scenario s = load(o);
  const std::string dir = o.out.empty() ? s.output_dir : o.out;
  spdlog::info("running '{}' ({} runs x {} steps, {} jobs)", s.name, s.n_runs, s.steps, o.jobs);
  const RunReport r = run_scenario(s, o.jobs);
  write_run(r, dir);
  std::cout << summary_table(r);
  spdlog::info("wrote {}/costs.json", dir);
  if (r.comparison.ordering_holds && !*r.comparison.ordering_holds) {
    spdlog::error("cost ordering J_cen <= J_dec <= J_blockdiag does not hold");
    return kOrdering;
  }
  return kOk;
}

int cmd_sweep(const Options& o) {
  const Scenario s = load(o);
  const std::string dir = o.out.empty() ? s.output_dir : o.out;
  const SweepParameter p = parse_sweep_parameter(o.param);
  spdlog::info("sweeping {} over {} points", to_string(p), o.grid.size());
  const SweepResult r = run_sweep(s, p, o.grid, o.monte_carlo, o.jobs);
  write_sweep(r, dir);
  if (r.monotone) spdlog::info("dec cost non-decreasing in d2: {}", *r.monotone);
  if (r.asymptote_gap) spdlog::info("asymptote gap |J_dec - J_blockdiag| / J_blockdiag = {:.4e}", *r.asymptote_gap);
  if (r.fir_nonincreasing) spdlog::info("structured cost non-increasing in taps: {}", *r.fir_nonincreasing);
  spdlog::info("wrote {}/sweep.csv", dir);
  return kOk;
}

int cmd_emit(const Options& o) {
  for (const auto& f : emit_plotdata(o.out)) spdlog::info("wrote {}", f);
  return kOk;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kConfig:
      return kConfig;
    case ErrorCode::kSynthesisFailure:
    case ErrorCode::kNoStabilizingSolution:
    case ErrorCode::kIllPosed:
    case ErrorCode::kUnstable:
      return kSynthesis;
    default:
      return kOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Delayed decentralized LQG wavelength control toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o.out, "Output directory (default: the scenario's output_dir)");
    c->add_option("--seed", o.seed, "Override the Monte Carlo base seed")->each([&](const std::string&) {
      o.seed_set = true;
    });
    c->add_option("--jobs", o.jobs, "Parallel Monte Carlo workers")->check(CLI::PositiveNumber);
    c->add_option("--arch", o.arch, "Comma-separated architectures")->delimiter(',');
  };

  auto* run = app.add_subcommand("run", "Synthesize, evaluate and compare the architectures");
  add_common(run);
  auto* sweep = app.add_subcommand("sweep", "Evaluate the architectures over a parameter grid");
  add_common(sweep);
  sweep->add_option("--param", o.param, "d2 | rho_P | fir_length | interburst")->required();
  sweep->add_option("--grid", o.grid, "Comma-separated grid values")->required()->delimiter(',');
  sweep->add_flag("--mc", o.monte_carlo, "Also run Monte Carlo at every grid point");
  auto* emit = app.add_subcommand("emit-plotdata", "Write tidy CSV tables from a report directory");
  emit->add_option("--out,dir", o.out, "Report directory")->required();
  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("--config", o.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }

  try {
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*emit) return cmd_emit(o);
    if (*validate) return cmd_validate(o);
  } catch (const ScenarioError& e) {
    for (const auto& p : e.problems()) spdlog::error("config: {}", p);
    return kConfig;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kOther;
  }
  return kOther;
}
