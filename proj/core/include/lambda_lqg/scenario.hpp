#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lambda_lqg/errors.hpp"
#include "lambda_lqg/plant_models.hpp"
#include "lambda_lqg/simulator.hpp"

namespace lambda_lqg {

inline constexpr int kScenarioVersion = 1;

struct DisturbanceSpec {
  double freq_hz = 1000.0;
  ActuatorKind target = ActuatorKind::kPzt;
  double eps = 1e-6;
  double drive_std = 1.0;
};

/// Everything needed to reproduce a run. Delays are given in seconds and
/// converted to steps at the sample rate.
struct Scenario {
  int version = kScenarioVersion;
  std::string name = "default";
  PztParams pzt;
  StepperParams stepper;
  double eps_reg = 1e-8;
  double sample_rate_hz = 6000.0;
  double tau_self = 2.0 / 6000.0;
  double tau_cross = 3.0 / 6000.0;
  BurstPattern burst;
  std::vector<DisturbanceSpec> disturbances;
  std::vector<std::string> architectures;  ///< empty: the five standard ones
  int fir_length = 40;
  LegacyParams legacy;
  int n_runs = 32;
  long steps = 20000;
  std::uint64_t base_seed = 1;
  InitialCondition initial = InitialCondition::kStationary;
  long trace_steps = 2000;
  std::string output_dir = "out";
};

/// Field-level validation failure; `problems` holds one "path: message"
/// entry per offending field.
class ScenarioError : public Error {
 public:
  explicit ScenarioError(std::vector<std::string> problems);
  [[nodiscard]] const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Strict parse: unknown keys, wrong types and a missing or unsupported
/// version are errors. Keys that are absent take their defaults.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
/// Full serialization with a fixed key order; parse∘serialize is the
/// identity on the serialized text.
std::string serialize_scenario(const Scenario& s);
void validate_scenario(const Scenario& s);

/// The plant and delays a scenario describes.
struct ScenarioModel {
  std::vector<SubsystemModel> subsystems;
  PartitionedPlant continuous;
  PartitionedPlant plant;  ///< discrete
  DiscreteDelays delays;
};
ScenarioModel build_scenario(const Scenario& s);

/// Comparison setup of a scenario (architectures, MC settings, delays).
ComparisonSetup comparison_setup(const Scenario& s, const ScenarioModel& m, int jobs = 1);

struct RunReport {
  Scenario scenario;
  DiscreteDelays delays;
  ComparisonResult comparison;
  std::vector<std::pair<std::string, SimulationTrace>> traces;
};

RunReport run_scenario(const Scenario& s, int jobs = 1);

/// Writes costs.json, summary.txt and traces/<architecture>.csv.
void write_run(const RunReport& r, const std::string& dir);
std::string summary_table(const RunReport& r);

enum class SweepParameter { kCrossDelay, kRhoP, kFirLength, kInterburst };
SweepParameter parse_sweep_parameter(const std::string& name);
const char* to_string(SweepParameter p);

struct SweepRow {
  double value = 0.0;
  std::vector<CostReport> reports;
};

struct SweepResult {
  SweepParameter parameter = SweepParameter::kCrossDelay;
  std::vector<std::string> architectures;
  std::vector<SweepRow> rows;
  /// Cross-delay sweeps: dec cost non-decreasing within 1e-9 relative, and
  /// |J_dec(d2max) − J_blockdiag| / J_blockdiag.
  std::optional<bool> monotone;
  std::optional<double> asymptote_gap;
  /// FIR sweeps: structured cost non-increasing in the number of taps.
  std::optional<bool> fir_nonincreasing;
};

/// Exact costs at each grid point (Monte Carlo only when `monte_carlo`).
/// Cross-delay grid values are steps; the cross delay is used directly as a
/// discrete d2 ≥ d1, so grids may leave the continuous 2τ1 > τ2 range.
SweepResult run_sweep(const Scenario& s, SweepParameter parameter, const std::vector<double>& grid,
                      bool monte_carlo = false, int jobs = 1);
/// Writes sweep.csv (with trailing "# key=value" verdict lines) and sweep.json.
void write_sweep(const SweepResult& r, const std::string& dir);

/// Tidy tables next to the inputs: costs_tidy.csv from costs.json and
/// sweep_tidy.csv from sweep.csv. Returns the files written; throws
/// kConfig "nothing to emit" when neither input exists.
std::vector<std::string> emit_plotdata(const std::string& dir);

}  // namespace lambda_lqg
