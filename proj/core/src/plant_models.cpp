#include "lambda_lqg/plant_models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

namespace {

void check_noise(const NoiseLevels& noise) {
  if (!(noise.process >= 0.0) || !(noise.measurement > 0.0)) {
    fail(ErrorCode::kInvalidArgument,
         "noise levels need process >= 0 and measurement > 0");
  }
}

void check_optics(double k_o, double rho) {
  if (!std::isfinite(k_o)) fail(ErrorCode::kInvalidArgument, "optics gain must be finite");
  if (!(rho > 0.0)) fail(ErrorCode::kInvalidArgument, "control weight must be positive");
}

// Continuous noise maps B1 = [σw·I 0], D21 = [0 σv·I].
void attach_noise(StateSpaceModel& m, const NoiseLevels& noise) {
  const Eigen::Index n = m.states();
  const Eigen::Index p = m.measurements();
  m.B1 = Matrix::Zero(n, n + p);
  m.B1.leftCols(n) = noise.process * Matrix::Identity(n, n);
  m.D21 = Matrix::Zero(p, n + p);
  m.D21.rightCols(p) = noise.measurement * Matrix::Identity(p, p);
  m.C1 = Matrix::Zero(0, n);
  m.D12 = Matrix::Zero(0, m.control_inputs());
  m.D11 = Matrix::Zero(0, n + p);
  m.validate();
}

}  // namespace

const char* to_string(ActuatorKind kind) {
  return kind == ActuatorKind::kPzt ? "pzt" : "stepper";
}

SubsystemModel make_pzt_model(const PztParams& p) {
  if (!(p.omega_n > 0.0)) fail(ErrorCode::kInvalidArgument, "PZT omega_n must be positive");
  if (!(p.zeta >= 0.0 && p.zeta < 2.0)) fail(ErrorCode::kInvalidArgument, "PZT zeta must lie in [0, 2)");
  if (!std::isfinite(p.k_dc) || p.k_dc == 0.0) fail(ErrorCode::kInvalidArgument, "PZT k_dc must be nonzero");
  check_noise(p.noise);
  check_optics(p.optics_gain, p.control_weight);

  const double w2 = p.omega_n * p.omega_n;
  SubsystemModel out;
  out.kind = ActuatorKind::kPzt;
  out.model.A = Matrix::Zero(3, 3);
  out.model.A << 0.0, 1.0, 0.0,
                 -w2, -2.0 * p.zeta * p.omega_n, p.k_dc * w2,
                 0.0, 0.0, 0.0;
  out.model.B2 = Matrix::Zero(3, 1);
  out.model.B2(2, 0) = 1.0;
  out.model.C2 = Matrix::Zero(1, 3);
  out.model.C2(0, 0) = 1.0;
  attach_noise(out.model, p.noise);
  out.optics_gain = p.optics_gain;
  out.control_weight = p.control_weight;
  return out;
}

SubsystemModel make_stepper_model(const StepperParams& p) {
  if (!(p.tau_motor > 0.0)) fail(ErrorCode::kInvalidArgument, "stepper tau_motor must be positive");
  if (!std::isfinite(p.k_dc) || p.k_dc == 0.0) fail(ErrorCode::kInvalidArgument, "stepper k_dc must be nonzero");
  check_noise(p.noise);
  check_optics(p.optics_gain, p.control_weight);

  SubsystemModel out;
  out.kind = ActuatorKind::kStepper;
  out.model.A = Matrix::Zero(2, 2);
  out.model.A << -1.0 / p.tau_motor, 0.0,
                 1.0, 0.0;
  out.model.B2 = Matrix::Zero(2, 1);
  out.model.B2(0, 0) = p.k_dc / p.tau_motor;
  out.model.C2 = Matrix::Zero(1, 2);
  out.model.C2(0, 1) = 1.0;
  attach_noise(out.model, p.noise);
  out.optics_gain = p.optics_gain;
  out.control_weight = p.control_weight;
  return out;
}

CostSpec build_cost_matrices(const std::vector<SubsystemModel>& subsystems, double eps_reg) {
  if (subsystems.size() != 2 || subsystems[0].kind != ActuatorKind::kPzt ||
      subsystems[1].kind != ActuatorKind::kStepper) {
    fail(ErrorCode::kInvalidArgument, "cost needs exactly two subsystems ordered (PZT, stepper)");
  }
  if (!(eps_reg >= 0.0)) fail(ErrorCode::kInvalidArgument, "eps_reg must be nonnegative");

  Eigen::Index n = 0, m = 0;
  for (const auto& s : subsystems) {
    n += s.model.states();
    m += s.model.control_inputs();
  }
  CostSpec cost;
  cost.eps_reg = eps_reg;
  cost.wavelength_row = RowVector::Zero(n);
  cost.R = Matrix::Zero(m, m);
  Eigen::Index xo = 0, uo = 0;
  for (const auto& s : subsystems) {
    const auto ns = s.model.states();
    const auto ms = s.model.control_inputs();
    cost.wavelength_row.segment(xo, ns) = s.optics_gain * s.model.C2.colwise().sum();
    cost.R.block(uo, uo, ms, ms) = s.control_weight * Matrix::Identity(ms, ms);
    xo += ns;
    uo += ms;
  }
  cost.Q = cost.wavelength_row.transpose() * cost.wavelength_row +
           eps_reg * Matrix::Identity(n, n);
  if (!(subsystems[0].control_weight > subsystems[1].control_weight)) {
    std::ostringstream os;
    os << "control weights rho_P=" << subsystems[0].control_weight
       << " <= rho_S=" << subsystems[1].control_weight
       << "; the fine actuator is normally the more expensive one";
    cost.warnings.push_back(os.str());
  }
  return cost;
}

PartitionedPlant assemble_global_plant(const std::vector<SubsystemModel>& subsystems,
                                       const CostSpec& cost) {
  std::vector<StateSpaceModel> models;
  std::vector<std::string> names;
  for (const auto& s : subsystems) {
    models.push_back(s.model);
    names.emplace_back(to_string(s.kind));
  }
  return partition(models, std::move(names), cost);
}

PartitionedPlant augment_disturbance(const PartitionedPlant& plant, double freq_hz,
                                     Eigen::Index target, double eps, double drive_std) {
  if (!(freq_hz > 0.0)) fail(ErrorCode::kInvalidArgument, "disturbance frequency must be positive");
  if (!(eps > 0.0)) fail(ErrorCode::kInvalidArgument, "disturbance regularization eps must be positive");
  if (!(drive_std >= 0.0)) fail(ErrorCode::kInvalidArgument, "disturbance drive must be nonnegative");
  if (plant.realization.is_discrete()) {
    fail(ErrorCode::kDomainMismatch, "augment the continuous plant before discretizing");
  }
  if (!plant.cost) fail(ErrorCode::kInvalidArgument, "plant carries no cost specification");
  plant.validate();
  if (target < 0 || target >= plant.subsystems()) {
    fail(ErrorCode::kInvalidArgument, "disturbance target out of range");
  }

  const double w = 2.0 * std::numbers::pi * freq_hz;
  std::vector<StateSpaceModel> parts;
  std::vector<RowVector> wavelength;
  for (Eigen::Index i = 0; i < plant.subsystems(); ++i) {
    StateSpaceModel s = plant.subsystem(i);
    const auto& b = plant.blocks[i];
    RowVector c = plant.cost->wavelength_row.segment(b.states.offset, b.states.size);
    if (i == target) {
      if (s.measurements() != 1) {
        fail(ErrorCode::kUnsupportedRepresentation,
             "disturbance target must have a single position measurement");
      }
      const Eigen::Index n = s.states();
      const Eigen::Index q = s.noise_inputs();
      const Eigen::Index m = s.control_inputs();
      // Optics gain of the target: cλ restricted to the block equals K_O·C2.
      const double k_o = c.dot(s.C2.row(0)) / s.C2.row(0).squaredNorm();

      StateSpaceModel a;
      a.A = Matrix::Zero(n + 2, n + 2);
      a.A.topLeftCorner(n, n) = s.A;
      a.A(n, n + 1) = w;
      a.A(n + 1, n) = -w;
      a.B1 = Matrix::Zero(n + 2, q + 2);
      a.B1.topLeftCorner(n, q) = s.B1;
      a.B1.bottomRightCorner(2, 2) = drive_std * Matrix::Identity(2, 2);
      a.B2 = Matrix::Zero(n + 2, m);
      a.B2.topRows(n) = s.B2;
      a.B2.bottomRows(2).setConstant(eps);
      a.C2 = Matrix::Zero(1, n + 2);
      a.C2.leftCols(n) = s.C2;
      a.C2(0, n) = 1.0;
      a.C2(0, n + 1) = eps;
      a.D21 = Matrix::Zero(1, q + 2);
      a.D21.leftCols(q) = s.D21;
      a.C1 = Matrix::Zero(0, n + 2);
      a.D12 = Matrix::Zero(0, m);
      a.D11 = Matrix::Zero(0, q + 2);
      a.validate();
      s = a;
      RowVector ca = RowVector::Zero(n + 2);
      ca.head(n) = c;
      ca(n) = k_o;
      c = ca;
    }
    parts.push_back(s);
    wavelength.push_back(c);
  }

  CostSpec cost = *plant.cost;
  Eigen::Index n = 0;
  for (const auto& c : wavelength) n += c.size();
  cost.wavelength_row = RowVector::Zero(n);
  Eigen::Index o = 0;
  for (const auto& c : wavelength) {
    cost.wavelength_row.segment(o, c.size()) = c;
    o += c.size();
  }
  cost.Q = cost.wavelength_row.transpose() * cost.wavelength_row +
           cost.eps_reg * Matrix::Identity(n, n);
  return partition(parts, plant.names, cost);
}

double aliased_frequency(double f, double fs) {
  if (!(f >= 0.0) || !(fs > 0.0)) fail(ErrorCode::kInvalidArgument, "aliased_frequency needs f >= 0, fs > 0");
  return std::abs(f - fs * std::round(f / fs));
}

}  // namespace lambda_lqg
