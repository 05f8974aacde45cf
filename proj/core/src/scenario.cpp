#include "lambda_lqg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

// Reads the fields of one JSON object, recording a problem per bad field and
// per key nobody asked for.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& problems)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (!obj_.is_object()) {
      problem("", "expected an object");
      valid_ = false;
    }
  }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  ~Reader() {
    if (!valid_) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) problem(it.key(), "unknown key");
    }
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (!valid_ || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        problem(key, "expected a number");
      }
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = get(key)) {
      if (v->is_number_integer() && (std::is_signed_v<Int> || v->get<long long>() >= 0 || v->is_number_unsigned())) {
        out = v->get<Int>();
      } else {
        problem(key, std::is_signed_v<Int> ? "expected an integer" : "expected a nonnegative integer");
      }
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        problem(key, "expected a string");
      }
    }
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void problem(const std::string& key, const std::string& what) {
    const std::string p = key.empty() ? path_ : path(key);
    problems_.push_back((p.empty() ? std::string("<root>") : p) + ": " + what);
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
  bool valid_ = true;
};

void read_noise(Reader& r, NoiseLevels& n, std::vector<std::string>& problems) {
  if (const json* v = r.get("noise")) {
    Reader nr(*v, r.path("noise"), problems);
    nr.number("process", n.process);
    nr.number("measurement", n.measurement);
  }
}

ordered noise_json(const NoiseLevels& n) {
  ordered j;
  j["process"] = n.process;
  j["measurement"] = n.measurement;
  return j;
}

const char* to_string(InitialCondition c) { return c == InitialCondition::kZero ? "zero" : "stationary"; }

// Cost column of a report: exact when known, Monte Carlo otherwise.
double report_cost(const CostReport& r) { return r.exact_h2.value_or(r.mc_mean); }

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kConfig, "cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) fail(ErrorCode::kConfig, "cannot write " + p.string());
  return f;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> problems)
    : Error(ErrorCode::kConfig, "invalid scenario: " + join(problems, "; ")),
      problems_(std::move(problems)) {}

// ---------------------------------------------------------------------------
// Serialization

Scenario scenario_from_json(const json& doc) {
  std::vector<std::string> problems;
  Scenario s;
  {
    Reader root(doc, "", problems);
    if (const json* v = root.get("version")) {
      if (!v->is_number_integer()) {
        root.problem("version", "expected an integer");
      } else if (v->get<int>() != kScenarioVersion) {
        root.problem("version", "unsupported version " + std::to_string(v->get<int>()) + " (expected " +
                                    std::to_string(kScenarioVersion) + ")");
      }
    } else if (doc.is_object()) {
      root.problem("version", "missing");
    }
    root.string("name", s.name);
    if (const json* v = root.get("plant")) {
      Reader plant(*v, "plant", problems);
      if (const json* pv = plant.get("pzt")) {
        Reader r(*pv, "plant.pzt", problems);
        r.number("omega_n", s.pzt.omega_n);
        r.number("zeta", s.pzt.zeta);
        r.number("k_dc", s.pzt.k_dc);
        read_noise(r, s.pzt.noise, problems);
        r.number("optics_gain", s.pzt.optics_gain);
        r.number("control_weight", s.pzt.control_weight);
      }
      if (const json* sv = plant.get("stepper")) {
        Reader r(*sv, "plant.stepper", problems);
        r.number("tau_motor", s.stepper.tau_motor);
        r.number("k_dc", s.stepper.k_dc);
        read_noise(r, s.stepper.noise, problems);
        r.number("optics_gain", s.stepper.optics_gain);
        r.number("control_weight", s.stepper.control_weight);
      }
      plant.number("eps_reg", s.eps_reg);
    }
    root.number("sample_rate_hz", s.sample_rate_hz);
    if (const json* v = root.get("delays")) {
      Reader r(*v, "delays", problems);
      r.number("tau_self", s.tau_self);
      r.number("tau_cross", s.tau_cross);
    }
    if (const json* v = root.get("burst")) {
      Reader r(*v, "burst", problems);
      r.integer("pulses_per_burst", s.burst.pulses_per_burst);
      r.integer("interburst_steps", s.burst.interburst_steps);
    }
    if (const json* v = root.get("disturbances")) {
      if (!v->is_array()) {
        root.problem("disturbances", "expected an array");
      } else {
        for (std::size_t i = 0; i < v->size(); ++i) {
          DisturbanceSpec d;
          Reader r((*v)[i], "disturbances[" + std::to_string(i) + "]", problems);
          r.number("freq_hz", d.freq_hz);
          std::string target = to_string(d.target);
          r.string("target", target);
          if (target == "pzt") {
            d.target = ActuatorKind::kPzt;
          } else if (target == "stepper") {
            d.target = ActuatorKind::kStepper;
          } else {
            r.problem("target", "expected \"pzt\" or \"stepper\"");
          }
          r.number("eps", d.eps);
          r.number("drive_std", d.drive_std);
          s.disturbances.push_back(d);
        }
      }
    }
    if (const json* v = root.get("architectures")) {
      if (!v->is_array()) {
        root.problem("architectures", "expected an array of names");
      } else {
        for (const auto& a : *v) {
          if (a.is_string()) {
            s.architectures.push_back(a.get<std::string>());
          } else {
            root.problem("architectures", "expected an array of names");
          }
        }
      }
    }
    root.integer("fir_length", s.fir_length);
    if (const json* v = root.get("legacy")) {
      Reader r(*v, "legacy", problems);
      r.number("fine_loop_gain", s.legacy.fine_loop_gain);
      r.number("desat_threshold", s.legacy.desat_threshold);
      r.number("desat_rate", s.legacy.desat_rate);
    }
    if (const json* v = root.get("monte_carlo")) {
      Reader r(*v, "monte_carlo", problems);
      r.integer("n_runs", s.n_runs);
      r.integer("steps", s.steps);
      r.integer("base_seed", s.base_seed);
      std::string init = to_string(s.initial);
      r.string("initial", init);
      if (init == "stationary") {
        s.initial = InitialCondition::kStationary;
      } else if (init == "zero") {
        s.initial = InitialCondition::kZero;
      } else {
        r.problem("initial", "expected \"stationary\" or \"zero\"");
      }
    }
    root.integer("trace_steps", s.trace_steps);
    root.string("output_dir", s.output_dir);
  }
  if (!problems.empty()) throw ScenarioError(std::move(problems));
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError({path + ": cannot open"});
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ScenarioError({path + ": " + e.what()});
  }
  return scenario_from_json(doc);
}

std::string serialize_scenario(const Scenario& s) {
  ordered j;
  j["version"] = s.version;
  j["name"] = s.name;
  ordered pzt;
  pzt["omega_n"] = s.pzt.omega_n;
  pzt["zeta"] = s.pzt.zeta;
  pzt["k_dc"] = s.pzt.k_dc;
  pzt["noise"] = noise_json(s.pzt.noise);
  pzt["optics_gain"] = s.pzt.optics_gain;
  pzt["control_weight"] = s.pzt.control_weight;
  ordered stp;
  stp["tau_motor"] = s.stepper.tau_motor;
  stp["k_dc"] = s.stepper.k_dc;
  stp["noise"] = noise_json(s.stepper.noise);
  stp["optics_gain"] = s.stepper.optics_gain;
  stp["control_weight"] = s.stepper.control_weight;
  j["plant"]["pzt"] = pzt;
  j["plant"]["stepper"] = stp;
  j["plant"]["eps_reg"] = s.eps_reg;
  j["sample_rate_hz"] = s.sample_rate_hz;
  j["delays"]["tau_self"] = s.tau_self;
  j["delays"]["tau_cross"] = s.tau_cross;
  j["burst"]["pulses_per_burst"] = s.burst.pulses_per_burst;
  j["burst"]["interburst_steps"] = s.burst.interburst_steps;
  j["disturbances"] = ordered::array();
  for (const auto& d : s.disturbances) {
    ordered dj;
    dj["freq_hz"] = d.freq_hz;
    dj["target"] = to_string(d.target);
    dj["eps"] = d.eps;
    dj["drive_std"] = d.drive_std;
    j["disturbances"].push_back(dj);
  }
  j["architectures"] = s.architectures;
  j["fir_length"] = s.fir_length;
  j["legacy"]["fine_loop_gain"] = s.legacy.fine_loop_gain;
  j["legacy"]["desat_threshold"] = s.legacy.desat_threshold;
  j["legacy"]["desat_rate"] = s.legacy.desat_rate;
  j["monte_carlo"]["n_runs"] = s.n_runs;
  j["monte_carlo"]["steps"] = s.steps;
  j["monte_carlo"]["base_seed"] = s.base_seed;
  j["monte_carlo"]["initial"] = to_string(s.initial);
  j["trace_steps"] = s.trace_steps;
  j["output_dir"] = s.output_dir;
  return j.dump(2) + "\n";
}

void validate_scenario(const Scenario& s) {
  std::vector<std::string> problems;
  auto guard = [&](const std::string& path, auto&& check) {
    try {
      check();
    } catch (const Error& e) {
      problems.push_back(path + ": " + e.what());
    }
  };
  guard("plant.pzt", [&] { make_pzt_model(s.pzt); });
  guard("plant.stepper", [&] { make_stepper_model(s.stepper); });
  if (!(s.pzt.optics_gain > 0.0)) problems.emplace_back("plant.pzt.optics_gain: must be positive");
  if (!(s.stepper.optics_gain > 0.0)) problems.emplace_back("plant.stepper.optics_gain: must be positive");
  if (!(s.pzt.control_weight > 0.0)) problems.emplace_back("plant.pzt.control_weight: must be positive");
  if (!(s.stepper.control_weight > 0.0)) problems.emplace_back("plant.stepper.control_weight: must be positive");
  if (!(s.eps_reg >= 0.0) || !std::isfinite(s.eps_reg)) problems.emplace_back("plant.eps_reg: must be nonnegative");
  if (!(s.sample_rate_hz > 0.0) || !std::isfinite(s.sample_rate_hz)) {
    problems.emplace_back("sample_rate_hz: must be positive");
  }
  const DelayReport dr = validate_delays(s.tau_self, s.tau_cross);
  if (!dr.ok) {
    problems.push_back("delays: " + dr.violation);
  } else if (s.sample_rate_hz > 0.0) {
    guard("delays", [&] { to_discrete({s.tau_self, s.tau_cross, std::nullopt}, 1.0 / s.sample_rate_hz); });
  }
  guard("burst", [&] { s.burst.validate(); });
  for (std::size_t i = 0; i < s.disturbances.size(); ++i) {
    const auto& d = s.disturbances[i];
    const std::string p = "disturbances[" + std::to_string(i) + "]";
    if (!(d.freq_hz > 0.0)) problems.push_back(p + ".freq_hz: must be positive");
    if (!(d.eps > 0.0)) problems.push_back(p + ".eps: must be positive");
    if (!(d.drive_std >= 0.0)) problems.push_back(p + ".drive_std: must be nonnegative");
  }
  std::set<std::string> seen;
  for (const auto& a : s.architectures) {
    if (!is_architecture_key(a)) {
      problems.push_back("architectures: unknown architecture '" + a + "'");
    } else if (!seen.insert(a).second) {
      problems.push_back("architectures: '" + a + "' listed twice");
    }
  }
  if (s.fir_length < 1) problems.emplace_back("fir_length: must be at least 1");
  if (!(s.legacy.fine_loop_gain > 0.0)) problems.emplace_back("legacy.fine_loop_gain: must be positive");
  if (!(s.legacy.desat_threshold >= 0.0)) problems.emplace_back("legacy.desat_threshold: must be nonnegative");
  if (!(s.legacy.desat_rate >= 0.0)) problems.emplace_back("legacy.desat_rate: must be nonnegative");
  if (s.n_runs < 2) problems.emplace_back("monte_carlo.n_runs: must be at least 2");
  if (s.steps < 10) problems.emplace_back("monte_carlo.steps: must be at least 10");
  if (s.trace_steps < 0) problems.emplace_back("trace_steps: must be nonnegative");
  if (s.output_dir.empty()) problems.emplace_back("output_dir: must not be empty");
  if (!problems.empty()) throw ScenarioError(std::move(problems));
}

// ---------------------------------------------------------------------------
// Runs

ScenarioModel build_scenario(const Scenario& s) {
  validate_scenario(s);
  ScenarioModel m;
  m.subsystems = {make_pzt_model(s.pzt), make_stepper_model(s.stepper)};
  m.continuous = assemble_global_plant(m.subsystems, build_cost_matrices(m.subsystems, s.eps_reg));
  for (const auto& d : s.disturbances) {
    const Eigen::Index target = d.target == ActuatorKind::kPzt ? 0 : 1;
    m.continuous = augment_disturbance(m.continuous, d.freq_hz, target, d.eps, d.drive_std);
  }
  const double h = 1.0 / s.sample_rate_hz;
  m.plant = discretize_plant(m.continuous, h);
  m.delays = *to_discrete({s.tau_self, s.tau_cross, std::nullopt}, h).discrete;
  return m;
}

ComparisonSetup comparison_setup(const Scenario& s, const ScenarioModel& m, int jobs) {
  ComparisonSetup c;
  c.d1 = m.delays.d1;
  c.d2 = m.delays.d2;
  c.legacy = s.legacy;
  c.mc.n_runs = s.n_runs;
  c.mc.steps = s.steps;
  c.mc.base_seed = s.base_seed;
  c.mc.burst = s.burst;
  c.mc.initial = s.initial;
  c.mc.jobs = std::max(1, jobs);
  c.architectures = s.architectures;
  c.fir_length = s.fir_length;
  return c;
}

RunReport run_scenario(const Scenario& s, int jobs) {
  const ScenarioModel m = build_scenario(s);
  const ComparisonSetup setup = comparison_setup(s, m, jobs);
  RunReport r;
  r.scenario = s;
  r.delays = m.delays;
  r.comparison = compare_architectures(m.plant, m.subsystems, setup);
  if (s.trace_steps > 0) {
    const auto keys = s.architectures.empty() ? architecture_keys() : s.architectures;
    for (const auto& key : keys) {
      const auto k = make_architecture(m.plant, m.subsystems, key, setup);
      SimulationSetup sim{s.trace_steps, s.base_seed, s.burst,
                          k->is_linear() ? s.initial : InitialCondition::kZero};
      r.traces.emplace_back(architecture_name(key, setup.d1, setup.d2, setup.fir_length),
                            simulate(m.plant, *k, sim));
    }
  }
  return r;
}

std::string summary_table(const RunReport& r) {
  std::ostringstream os;
  os << "scenario " << r.scenario.name << ": d1 = " << r.delays.d1 << ", d2 = " << r.delays.d2
     << ", h = " << r.delays.h << " s\n\n";
  os << std::left << std::setw(22) << "architecture" << std::right << std::setw(18) << "exact_h2"
     << std::setw(18) << "mc_mean" << std::setw(14) << "mc_stderr" << "  flag\n";
  for (const auto& rep : r.comparison.reports) {
    os << std::left << std::setw(22) << rep.architecture << std::right << std::setw(18);
    if (rep.exact_h2) {
      os << std::setprecision(10) << *rep.exact_h2;
    } else {
      os << "-";
    }
    os << std::setw(18) << std::setprecision(10) << rep.mc_mean << std::setw(14) << std::setprecision(4)
       << rep.mc_stderr << "  " << (rep.flagged ? "!" : "") << "\n";
  }
  auto verdict = [](const std::optional<bool>& b) { return b ? (*b ? "holds" : "FAILS") : "n/a"; };
  os << "\nordering J_cen <= J_dec <= J_blockdiag: " << verdict(r.comparison.ordering_holds) << "\n";
  os << "legacy above dec by 3 stderr: " << verdict(r.comparison.legacy_dominated) << "\n";
  for (const auto& n : r.comparison.notes) os << "note: " << n << "\n";
  return os.str();
}

void write_run(const RunReport& r, const std::string& dir) {
  ensure_dir(dir);
  json costs = to_json(r.comparison);
  costs["scenario"] = r.scenario.name;
  costs["delays"] = {{"d1", r.delays.d1}, {"d2", r.delays.d2}, {"h", r.delays.h}};
  open_out(fs::path(dir) / "costs.json") << costs.dump(2) << "\n";
  open_out(fs::path(dir) / "summary.txt") << summary_table(r);
  open_out(fs::path(dir) / "scenario.json") << serialize_scenario(r.scenario);
  if (!r.traces.empty()) {
    const fs::path traces = fs::path(dir) / "traces";
    ensure_dir(traces.string());
    for (const auto& [name, tr] : r.traces) write_trace_csv(tr, (traces / (name + ".csv")).string());
  }
}

// ---------------------------------------------------------------------------
// Sweeps

SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "d2") return SweepParameter::kCrossDelay;
  if (name == "rho_P") return SweepParameter::kRhoP;
  if (name == "fir_length") return SweepParameter::kFirLength;
  if (name == "interburst") return SweepParameter::kInterburst;
  fail(ErrorCode::kConfig, "unknown sweep parameter '" + name + "' (d2, rho_P, fir_length, interburst)");
}

const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::kCrossDelay: return "d2";
    case SweepParameter::kRhoP: return "rho_P";
    case SweepParameter::kFirLength: return "fir_length";
    case SweepParameter::kInterburst: return "interburst";
  }
  return "?";
}

SweepResult run_sweep(const Scenario& base, SweepParameter parameter, const std::vector<double>& grid,
                      bool monte_carlo, int jobs) {
  if (grid.empty()) fail(ErrorCode::kConfig, "sweep grid is empty");
  const bool integral = parameter != SweepParameter::kRhoP;
  for (double v : grid) {
    if (!std::isfinite(v) || (integral && v != std::floor(v))) {
      fail(ErrorCode::kConfig, std::string("grid values for ") + to_string(parameter) + " must be integers");
    }
  }
  // Gating leaves the exact cost unchanged, so interburst sweeps need Monte Carlo.
  if (parameter == SweepParameter::kInterburst) monte_carlo = true;

  SweepResult out;
  out.parameter = parameter;
  if (parameter == SweepParameter::kFirLength) {
    out.architectures = {"dec", "fir"};
  } else if (!base.architectures.empty()) {
    out.architectures = base.architectures;
  } else {
    out.architectures = architecture_keys();
  }
  if (!monte_carlo) {
    std::erase(out.architectures, std::string("legacy"));
  }

  for (double v : grid) {
    Scenario s = base;
    if (parameter == SweepParameter::kRhoP) s.pzt.control_weight = v;
    if (parameter == SweepParameter::kFirLength) s.fir_length = static_cast<int>(v);
    if (parameter == SweepParameter::kInterburst) s.burst.interburst_steps = static_cast<int>(v);
    const ScenarioModel m = build_scenario(s);
    ComparisonSetup setup = comparison_setup(s, m, jobs);
    setup.architectures = out.architectures;
    setup.monte_carlo = monte_carlo;
    if (parameter == SweepParameter::kCrossDelay) {
      setup.d2 = static_cast<int>(v);
      validate_discrete(setup.d1, setup.d2);
    }
    ComparisonResult c = compare_architectures(m.plant, m.subsystems, setup);
    // Keep the architecture order of the header rather than the cost order.
    SweepRow row;
    row.value = v;
    for (const auto& key : out.architectures) {
      const std::string name = architecture_name(key, setup.d1, setup.d2, setup.fir_length);
      for (const auto& rep : c.reports) {
        if (rep.architecture == name) row.reports.push_back(rep);
      }
    }
    out.rows.push_back(std::move(row));
  }

  auto column = [&](const std::string& key) -> std::optional<std::size_t> {
    const auto it = std::find(out.architectures.begin(), out.architectures.end(), key);
    if (it == out.architectures.end()) return std::nullopt;
    return static_cast<std::size_t>(it - out.architectures.begin());
  };
  std::vector<std::size_t> order(out.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.rows[a].value < out.rows[b].value; });
  auto nondecreasing = [&](std::size_t col, double sign) {
    for (std::size_t k = 1; k < order.size(); ++k) {
      const double prev = report_cost(out.rows[order[k - 1]].reports[col]);
      const double next = report_cost(out.rows[order[k]].reports[col]);
      if (sign * (next - prev) < -1e-9 * std::abs(prev)) return false;
    }
    return true;
  };
  if (parameter == SweepParameter::kCrossDelay) {
    if (const auto dec = column("dec")) {
      out.monotone = nondecreasing(*dec, 1.0);
      if (const auto bd = column("blockdiag_d1")) {
        const auto& last = out.rows[order.back()];
        const double jd = report_cost(last.reports[*dec]);
        const double jb = report_cost(last.reports[*bd]);
        out.asymptote_gap = std::abs(jd - jb) / jb;
      }
    }
  }
  if (parameter == SweepParameter::kFirLength) {
    if (const auto fir = column("fir")) out.fir_nonincreasing = nondecreasing(*fir, -1.0);
  }
  return out;
}

void write_sweep(const SweepResult& r, const std::string& dir) {
  ensure_dir(dir);
  {
    auto f = open_out(fs::path(dir) / "sweep.csv");
    f << "parameter,value";
    for (const auto& a : r.architectures) f << ',' << a << ',' << a << "_stderr";
    f << '\n';
    for (const auto& row : r.rows) {
      f << to_string(r.parameter) << ',' << format_number(row.value);
      for (const auto& rep : row.reports) {
        f << ',' << format_number(report_cost(rep)) << ',';
        if (!rep.exact_h2) f << format_number(rep.mc_stderr);
      }
      f << '\n';
    }
    if (r.monotone) f << "# monotone_nondecreasing=" << (*r.monotone ? "true" : "false") << '\n';
    if (r.asymptote_gap) f << "# asymptote_gap=" << format_number(*r.asymptote_gap) << '\n';
    if (r.fir_nonincreasing) f << "# fir_nonincreasing=" << (*r.fir_nonincreasing ? "true" : "false") << '\n';
  }
  json j;
  j["parameter"] = to_string(r.parameter);
  j["architectures"] = r.architectures;
  j["rows"] = json::array();
  for (const auto& row : r.rows) {
    json reps = json::array();
    for (const auto& rep : row.reports) reps.push_back(to_json(rep));
    j["rows"].push_back({{"value", row.value}, {"reports", reps}});
  }
  j["monotone_nondecreasing"] = r.monotone ? json(*r.monotone) : json(nullptr);
  j["asymptote_gap"] = r.asymptote_gap ? json(*r.asymptote_gap) : json(nullptr);
  j["fir_nonincreasing"] = r.fir_nonincreasing ? json(*r.fir_nonincreasing) : json(nullptr);
  open_out(fs::path(dir) / "sweep.json") << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Plot data

std::vector<std::string> emit_plotdata(const std::string& dir) {
  std::vector<std::string> written;
  const fs::path costs = fs::path(dir) / "costs.json";
  const fs::path sweep = fs::path(dir) / "sweep.csv";
  const char* header = "architecture,parameter,value,cost,stderr,source\n";

  if (fs::exists(costs)) {
    std::ifstream in(costs);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kConfig, costs.string() + ": " + e.what());
    }
    if (!doc.contains("reports") || !doc["reports"].is_array()) {
      fail(ErrorCode::kConfig, costs.string() + ": no reports array");
    }
    const fs::path out = fs::path(dir) / "costs_tidy.csv";
    auto f = open_out(out);
    f << header;
    for (const auto& rep : doc["reports"]) {
      const bool exact = rep.contains("exact_h2") && rep["exact_h2"].is_number();
      const double cost = exact ? rep["exact_h2"].get<double>() : rep.value("mc_mean", 0.0);
      f << rep.value("architecture", "") << ",,," << format_number(cost) << ','
        << (exact ? "" : format_number(rep.value("mc_stderr", 0.0))) << ',' << (exact ? "exact" : "mc")
        << '\n';
    }
    written.push_back(out.string());
  }

  if (fs::exists(sweep)) {
    std::ifstream in(sweep);
    std::string line;
    std::vector<std::string> head;
    struct Entry {
      double value;
      std::size_t arch;
      std::string parameter, cost, stderr_cell;
    };
    std::vector<Entry> rows;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto cells = split_csv(line);
      if (head.empty()) {
        head = cells;
        if (head.size() < 2 || head[0] != "parameter" || head[1] != "value" || head.size() % 2 != 0) {
          fail(ErrorCode::kConfig, sweep.string() + ": unexpected header");
        }
        continue;
      }
      if (cells.size() != head.size()) fail(ErrorCode::kConfig, sweep.string() + ": ragged row");
      for (std::size_t c = 2; c + 1 < cells.size(); c += 2) {
        rows.push_back({std::stod(cells[1]), c, cells[0], cells[c], cells[c + 1]});
      }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Entry& a, const Entry& b) {
      return a.value != b.value ? a.value < b.value : a.arch < b.arch;
    });
    const fs::path out = fs::path(dir) / "sweep_tidy.csv";
    auto f = open_out(out);
    f << header;
    for (const auto& e : rows) {
      f << head[e.arch] << ',' << e.parameter << ',' << format_number(e.value) << ',' << e.cost << ','
        << e.stderr_cell << ',' << (e.stderr_cell.empty() ? "exact" : "mc") << '\n';
    }
    written.push_back(out.string());
  }

  if (written.empty()) fail(ErrorCode::kConfig, "nothing to emit in " + dir);
  return written;
}

}  // namespace lambda_lqg
