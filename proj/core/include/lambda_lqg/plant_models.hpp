#pragma once

#include <vector>

#include "lambda_lqg/partitioned_plant.hpp"

namespace lambda_lqg {

enum class ActuatorKind { kPzt, kStepper };

const char* to_string(ActuatorKind kind);

/// Standard deviations of the continuous white noise acting on every state
/// (process) and on the position measurement.
struct NoiseLevels {
  double process = 1.0;
  double measurement = 1.0;
};

/// One actuator+prism channel. `model` is continuous with B1 = [σw·I 0] and
/// D21 = [0 σv]; it has no regulated output of its own.
struct SubsystemModel {
  ActuatorKind kind = ActuatorKind::kPzt;
  StateSpaceModel model;
  double optics_gain = 1.0;     ///< K_Oi, nm per position unit
  double control_weight = 1.0;  ///< ρ_i
};

struct PztParams {
  double omega_n = 2.0 * 3.14159265358979323846 * 500.0;
  double zeta = 0.6;
  double k_dc = 1.0;
  NoiseLevels noise;
  double optics_gain = 0.05;
  double control_weight = 1e-2;
};

struct StepperParams {
  double tau_motor = 0.05;
  double k_dc = 1.0;
  NoiseLevels noise;
  double optics_gain = 0.25;
  double control_weight = 1e-3;
};

/// PZT + prism: states (position, velocity, drive voltage). The drive voltage
/// integrates the command, so u is a voltage rate:
///
///   A = [[0, 1, 0], [-ωn², -2ζωn, k_dc·ωn²], [0, 0, 0]],  B2 = [0; 0; 1],
///   C2 = [1, 0, 0].
SubsystemModel make_pzt_model(const PztParams& params);

/// Stepper + prism: first-order motor lag followed by a position integrator,
///
///   A = [[-1/τ, 0], [1, 0]],  B2 = [k_dc/τ; 0],  C2 = [0, 1].
SubsystemModel make_stepper_model(const StepperParams& params);

/// Q = cλᵀcλ + eps_reg·I with cλ = [K_OP·C2_P, K_OS·C2_S], R = diag(ρ_P, ρ_S).
/// Requires exactly two subsystems, PZT first.
CostSpec build_cost_matrices(const std::vector<SubsystemModel>& subsystems, double eps_reg);

/// Continuous global plant with C1 = [Q^½; 0] and D12 = [0; R^½].
PartitionedPlant assemble_global_plant(const std::vector<SubsystemModel>& subsystems,
                                       const CostSpec& cost);

/// Appends an undamped oscillator at `freq_hz` to subsystem `target` of a
/// continuous plant. The oscillator is driven by its own process noise
/// (intensity drive_std per state), its first state adds to the target's
/// measured position and to the wavelength error, and B2/C2 receive ε entries
/// on the oscillator rows/columns. The cost is rebuilt with the same eps_reg.
PartitionedPlant augment_disturbance(const PartitionedPlant& plant, double freq_hz,
                                     Eigen::Index target, double eps, double drive_std = 1.0);

/// |f − fs·round(f/fs)|, the apparent frequency of f sampled at fs.
double aliased_frequency(double f, double fs);

}  // namespace lambda_lqg
