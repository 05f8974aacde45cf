#pragma once

#include <vector>

#include "lambda_lqg/controllers.hpp"
#include "lambda_lqg/synthesis.hpp"

namespace lambda_lqg {

// Finite-horizon problems use the total cost Σ_{t<T} E‖z(t)‖² with
// x(0) ~ N(0, Σ0), zero terminal weight and white noise from t = 0.

/// Time-varying Kalman gains (forward from P_0 = Σ0) and regulator gains
/// (backward from X_T = 0), both indexed t = 0..T−1.
struct FiniteHorizonGains {
  std::vector<KalmanGains> kalman;
  std::vector<RiccatiStep> regulator;
};
FiniteHorizonGains finite_horizon_gains(const StateSpaceModel& plant, int horizon,
                                        const Matrix& initial_covariance);

/// Optimal delay-free cost by dynamic programming:
///   Σ_t tr(C1 (P_t − M_t V_t M_tᵀ) C1ᵀ) + Σ_t tr(X_t M_t V_t M_tᵀ).
/// Needs uncorrelated process and measurement noise.
double finite_horizon_lqg_cost(const StateSpaceModel& plant, int horizon,
                               const Matrix& initial_covariance);

/// Time-varying decentralized law for own delay d1 and cross delay d2 on the
/// horizon; Σ0 must be block diagonal so that the subsystem filters stay
/// independent. The predicted cost is exact.
ControllerRealization finite_horizon_decentralized(const PartitionedPlant& plant, int d1, int d2,
                                                   int horizon, const Matrix& initial_covariance);

/// Exact finite-horizon cost of any linear (possibly time-varying)
/// controller, from the responses to the initial-state directions and to
/// unit noise impulses.
double finite_horizon_cost(const StateSpaceModel& plant, const RuntimeController& controller,
                           int horizon, const Matrix& initial_covariance);

/// Best linear policy in which u_i(t) depends on the open-loop measurements
/// ỹ_i(s), s ≤ t − d1, and ỹ_j(s), s ≤ t − d2. Because the subsystems are
/// decoupled each agent can form ỹ from y and inputs it already knows, so
/// this is the optimum over all linear output-feedback policies with the
/// same information; the cost is a convex quadratic in the gains and is
/// minimized through its normal equations.
struct OraclePolicy {
  std::vector<std::vector<Matrix>> gains;  ///< gains[t][s], m×p, acting on ỹ(s)
  double cost = 0.0;
  Eigen::Index variables = 0;
};

inline constexpr int kOracleMaxHorizon = 25;
inline constexpr Eigen::Index kOracleMaxStates = 8;

OraclePolicy finite_horizon_oracle(const PartitionedPlant& plant, int d1, int d2, int horizon,
                                   const Matrix& initial_covariance);

}  // namespace lambda_lqg
