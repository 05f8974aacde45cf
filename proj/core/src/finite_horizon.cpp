#include "lambda_lqg/finite_horizon.hpp"

#include <sstream>

#include "lambda_lqg/errors.hpp"
#include "response.hpp"

namespace lambda_lqg {

namespace {

void check_horizon(int horizon) {
  if (horizon < 1) fail(ErrorCode::kInvalidArgument, "horizon must be at least one step");
}

void check_initial_covariance(const Matrix& s, Eigen::Index n) {
  if (s.rows() != n || s.cols() != n) fail(ErrorCode::kDimensionMismatch, "initial covariance must be n x n");
  const double scale = std::max(1.0, s.norm());
  if ((s - s.transpose()).norm() > 1e-12 * scale) {
    fail(ErrorCode::kInvalidArgument, "initial covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s));
  if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
    fail(ErrorCode::kInvalidArgument, "initial covariance must be PSD");
  }
}

void require_plain_noise(const StateSpaceModel& p) {
  if ((p.B1 * p.D21.transpose()).norm() > 1e-12 * (1.0 + p.B1.norm() * p.D21.norm())) {
    fail(ErrorCode::kUnsupportedRepresentation, "finite-horizon synthesis needs uncorrelated noise");
  }
  if (p.D11.norm() != 0.0) {
    fail(ErrorCode::kUnsupportedRepresentation, "finite-horizon synthesis needs D11 = 0");
  }
}

double filtered_floor(const StateSpaceModel& p, const KalmanGains& k) {
  return (p.C1 * (k.P - k.M * k.V * k.M.transpose()) * p.C1.transpose()).trace();
}

}  // namespace

FiniteHorizonGains finite_horizon_gains(const StateSpaceModel& plant, int horizon,
                                        const Matrix& initial_covariance) {
  check_horizon(horizon);
  plant.validate_for_synthesis();
  check_initial_covariance(initial_covariance, plant.states());
  FiniteHorizonGains g;
  Matrix p = symmetrize(initial_covariance);
  for (int t = 0; t < horizon; ++t) {
    g.kalman.push_back(kalman_update(plant, p));
    p = kalman_next_covariance(plant, g.kalman.back());
  }
  g.regulator = riccati_recursion_finite({plant.A, plant.B2, plant.C1, plant.D12},
                                         Matrix::Zero(plant.states(), plant.states()), horizon);
  return g;
}

double finite_horizon_lqg_cost(const StateSpaceModel& plant, int horizon,
                               const Matrix& initial_covariance) {
  require_plain_noise(plant);
  const FiniteHorizonGains g = finite_horizon_gains(plant, horizon, initial_covariance);
  double j = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const auto& k = g.kalman[static_cast<std::size_t>(t)];
    j += filtered_floor(plant, k);
    j += (g.regulator[static_cast<std::size_t>(t)].X * k.M * k.V * k.M.transpose()).trace();
  }
  return j;
}

ControllerRealization finite_horizon_decentralized(const PartitionedPlant& plant, int d1, int d2,
                                                   int horizon, const Matrix& initial_covariance) {
  detail::require_discrete_partitioned(plant);
  validate_discrete(d1, d2);
  const auto& r = plant.realization;
  require_plain_noise(r);
  check_initial_covariance(initial_covariance, r.states());
  for (std::size_t i = 0; i < plant.blocks.size(); ++i) {
    for (std::size_t j = 0; j < plant.blocks.size(); ++j) {
      if (i == j) continue;
      const auto& bi = plant.blocks[i].states;
      const auto& bj = plant.blocks[j].states;
      if (initial_covariance.block(bi.offset, bj.offset, bi.size, bj.size).norm() != 0.0) {
        fail(ErrorCode::kInvalidArgument, "initial covariance must be block diagonal");
      }
    }
  }
  const FiniteHorizonGains g = finite_horizon_gains(r, horizon, initial_covariance);
  const Eigen::Index n = r.states();
  const Eigen::Index m = r.control_inputs();
  const Eigen::Index p = r.measurements();
  const int big_d = d2;
  const auto groups = detail::input_groups(plant.blocks);

  // Cost-to-go X_t for t = 0..T, X_T = 0.
  std::vector<Matrix> x(static_cast<std::size_t>(horizon + 1), Matrix::Zero(n, n));
  for (int t = 0; t < horizon; ++t) x[static_cast<std::size_t>(t)] = g.regulator[static_cast<std::size_t>(t)].X;

  InnovationLaw law;
  law.d1 = d1;
  law.d2 = d2;
  law.entry_age = big_d;
  law.communicating = true;
  law.A = r.A;
  law.B = r.B2;
  law.C = r.C2;
  law.blocks = plant.blocks;
  law.stabilizer = detail::blockdiag_gain(plant);

  double cost = 0.0;
  for (int s = 0; s < horizon; ++s) {
    const auto& k = g.kalman[static_cast<std::size_t>(s)];
    const Matrix& f = g.regulator[static_cast<std::size_t>(s)].F;
    law.filter_gain.push_back(k.L);
    law.filter_update.push_back(k.M);
    law.tail_gain.push_back(f);
    std::vector<Matrix> taps(static_cast<std::size_t>(big_d), Matrix::Zero(m, p));
    std::vector<Matrix> responses(static_cast<std::size_t>(big_d), Matrix::Zero(n, p));
    Matrix entry = Matrix::Zero(n, p);
    Matrix entry_next = Matrix::Zero(n, p);
    cost += filtered_floor(r, k);

    const int ages = std::min(big_d, horizon - s);
    for (Eigen::Index i = 0; i < plant.subsystems(); ++i) {
      const BlockRange y = detail::measurement_range(plant.blocks, i);
      const Matrix s0 = k.M.middleCols(y.offset, y.size);
      const Matrix c0 = k.L.middleCols(y.offset, y.size) - r.A * s0;
      const Matrix w = detail::innovation_factor(k.V.block(y.offset, y.offset, y.size, y.size));
      if (big_d == 0) {
        entry.middleCols(y.offset, y.size) = s0;
        entry_next.middleCols(y.offset, y.size) = c0;
        cost += detail::tail_only_cost(r, f, s0, c0, w, x[static_cast<std::size_t>(s + 1)]);
        continue;
      }
      const detail::Response resp = detail::restricted_response(
          r, groups, i, d1, d2, s0, c0, w, ages, x[static_cast<std::size_t>(s + ages)]);
      for (int a = 0; a < ages; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        taps[ua].middleCols(y.offset, y.size) = resp.taps[ua];
        responses[ua].middleCols(y.offset, y.size) = resp.states[ua];
      }
      if (ages == big_d) entry.middleCols(y.offset, y.size) = resp.end_state;
      cost += resp.cost;
    }
    law.taps.push_back(std::move(taps));
    law.responses.push_back(std::move(responses));
    law.entry.push_back(std::move(entry));
    law.entry_next.push_back(std::move(entry_next));
  }
  law.validate();
  std::ostringstream name;
  name << "dec_" << d1 << "_" << d2 << "_T" << horizon;
  return {name.str(), std::move(law), cost};
}

double finite_horizon_cost(const StateSpaceModel& plant, const RuntimeController& controller,
                           int horizon, const Matrix& initial_covariance) {
  check_horizon(horizon);
  plant.validate();
  check_initial_covariance(initial_covariance, plant.states());
  if (controller.measurements() != plant.measurements() ||
      controller.inputs() != plant.control_inputs()) {
    fail(ErrorCode::kDimensionMismatch, "controller does not fit the plant");
  }
  auto k = controller.clone();
  const Eigen::Index q = plant.noise_inputs();
  auto response_cost = [&](const Vector& x0, int impulse_time, Eigen::Index impulse_channel) {
    k->reset();
    Vector x = x0;
    double j = 0.0;
    for (int t = 0; t < horizon; ++t) {
      Vector w = Vector::Zero(q);
      if (t == impulse_time) w(impulse_channel) = 1.0;
      const Vector y = plant.C2 * x + plant.D21 * w;
      const Vector u = k->step(y, true);
      j += (plant.C1 * x + plant.D11 * w + plant.D12 * u).squaredNorm();
      x = plant.A * x + plant.B1 * w + plant.B2 * u;
    }
    return j;
  };
  double total = 0.0;
  const Matrix root = psd_factor(symmetrize(initial_covariance));
  for (Eigen::Index r = 0; r < root.rows(); ++r) total += response_cost(root.row(r).transpose(), -1, 0);
  for (int t = 0; t < horizon; ++t) {
    for (Eigen::Index c = 0; c < q; ++c) total += response_cost(Vector::Zero(plant.states()), t, c);
  }
  return total;
}

OraclePolicy finite_horizon_oracle(const PartitionedPlant& plant, int d1, int d2, int horizon,
                                   const Matrix& initial_covariance) {
  plant.validate();
  validate_discrete(d1, d2);
  check_horizon(horizon);
  const auto& r = plant.realization;
  if (!r.is_discrete()) fail(ErrorCode::kDomainMismatch, "the oracle needs a discrete plant");
  if (horizon > kOracleMaxHorizon || r.states() > kOracleMaxStates) {
    std::ostringstream os;
    os << "oracle limited to T <= " << kOracleMaxHorizon << " and n <= " << kOracleMaxStates;
    fail(ErrorCode::kSizeLimit, os.str());
  }
  check_initial_covariance(initial_covariance, r.states());

  const Eigen::Index n = r.states();
  const Eigen::Index q = r.noise_inputs();
  const Eigen::Index m = r.control_inputs();
  const Eigen::Index p = r.measurements();
  const Eigen::Index nz = r.regulated_outputs();
  const Eigen::Index T = horizon;
  const Matrix root = psd_factor(symmetrize(initial_covariance));
  const Eigen::Index n0 = root.rows();
  const Eigen::Index N = n0 + T * q;  // standard normal sources: x0 directions, then w(0..T−1)

  // Open-loop measurements ỹ and regulated outputs as maps of the sources.
  Matrix psi(T * p, N);
  Matrix z0(T * nz, N);
  Matrix x = Matrix::Zero(n, N);
  x.leftCols(n0) = root.transpose();
  for (Eigen::Index t = 0; t < T; ++t) {
    Matrix e = Matrix::Zero(q, N);
    e.middleCols(n0 + t * q, q) = Matrix::Identity(q, q);
    psi.middleRows(t * p, p) = r.C2 * x + r.D21 * e;
    z0.middleRows(t * nz, nz) = r.C1 * x + r.D11 * e;
    x = r.A * x + r.B1 * e;
  }
  // Effect of u(τ) on the stacked regulated output: column block τ.
  Matrix g = Matrix::Zero(T * nz, T * m);
  {
    Matrix impulse = r.B2;  // A^{k} B2
    for (Eigen::Index tau = 0; tau < T; ++tau) g.block(tau * nz, tau * m, nz, m) = r.D12;
    for (Eigen::Index lag = 1; lag < T; ++lag) {
      const Matrix blk = r.C1 * impulse;
      for (Eigen::Index tau = 0; tau + lag < T; ++tau) g.block((tau + lag) * nz, tau * m, nz, m) = blk;
      impulse = r.A * impulse;
    }
  }

  // Decision variables (input channel at τ, measurement channel at s).
  struct Var {
    Eigen::Index input_row;  // τ·m + c
    Eigen::Index meas_row;   // s·p + ch
  };
  std::vector<Var> vars;
  auto agent_of = [&](auto member) {
    for (std::size_t a = 0; a < plant.blocks.size(); ++a) {
      if (member(plant.blocks[a])) return static_cast<Eigen::Index>(a);
    }
    return Eigen::Index{-1};
  };
  for (Eigen::Index tau = 0; tau < T; ++tau) {
    for (Eigen::Index c = 0; c < m; ++c) {
      const Eigen::Index gi = agent_of([&](const SubsystemBlocks& b) {
        return c >= b.inputs.offset && c < b.inputs.offset + b.inputs.size;
      });
      for (Eigen::Index s = 0; s <= tau; ++s) {
        for (Eigen::Index ch = 0; ch < p; ++ch) {
          const Eigen::Index hj = agent_of([&](const SubsystemBlocks& b) {
            return ch >= b.measurements.offset && ch < b.measurements.offset + b.measurements.size;
          });
          if (!tap_allowed(static_cast<int>(tau - s), gi, hj, d1, d2)) continue;
          vars.push_back({tau * m + c, s * p + ch});
        }
      }
    }
  }

  OraclePolicy out;
  out.variables = static_cast<Eigen::Index>(vars.size());
  out.gains.assign(static_cast<std::size_t>(T), std::vector<Matrix>(static_cast<std::size_t>(T), Matrix::Zero(m, p)));
  const double base = z0.squaredNorm();
  if (vars.empty()) {
    out.cost = base;
    return out;
  }
  // ‖Z0 + Σ θ_v g_v h_vᵀ‖²: Gram entries factor into (g_vᵀ g_w)(h_vᵀ h_w).
  const Matrix gg = g.transpose() * g;
  const Matrix hh = psi * psi.transpose();
  const Matrix cross = g.transpose() * z0 * psi.transpose();
  const auto nv = static_cast<Eigen::Index>(vars.size());
  Matrix gram(nv, nv);
  Vector b(nv);
  for (Eigen::Index v = 0; v < nv; ++v) {
    const auto& a = vars[static_cast<std::size_t>(v)];
    b(v) = cross(a.input_row, a.meas_row);
    for (Eigen::Index w = 0; w <= v; ++w) {
      const auto& c = vars[static_cast<std::size_t>(w)];
      gram(v, w) = gg(a.input_row, c.input_row) * hh(a.meas_row, c.meas_row);
      gram(w, v) = gram(v, w);
    }
  }
  const Vector theta = gram.completeOrthogonalDecomposition().solve(-b);
  out.cost = base + b.dot(theta);
  for (Eigen::Index v = 0; v < nv; ++v) {
    const auto& a = vars[static_cast<std::size_t>(v)];
    const Eigen::Index tau = a.input_row / m;
    const Eigen::Index s = a.meas_row / p;
    out.gains[static_cast<std::size_t>(tau)][static_cast<std::size_t>(s)](a.input_row % m, a.meas_row % p) =
        theta(v);
  }
  return out;
}

}  // namespace lambda_lqg
