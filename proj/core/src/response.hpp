#pragma once

// Per-source optimal responses shared by the stationary and finite-horizon
// decentralized syntheses.

#include <optional>
#include <vector>

#include "lambda_lqg/partitioned_plant.hpp"

namespace lambda_lqg::detail {

struct Response {
  std::vector<Matrix> taps;    ///< u(k) per age, m×p_i
  std::vector<Matrix> states;  ///< s(k) per age, n×p_i
  Matrix end_state;            ///< s(K)
  double cost = 0.0;
};

/// Input agent owning each control channel range.
struct InputGroups {
  std::vector<BlockRange> inputs;
};

/// Optimal response of the predicted state to one innovation source over
/// ages 0..K−1 when, at age k, only the inputs allowed by the delay pattern
/// may react; x_end is the cost-to-go weight at age K.
///
///   s(0) = s0, s(k+1) = A s(k) + B u(k) + [k = 0] c0,
///   cost = Σ_k ‖(C1 s(k) + D12 u(k)) W‖² + tr(Wᵀ s(K)ᵀ x_end s(K) W).
Response restricted_response(const StateSpaceModel& plant, const InputGroups& groups,
                             Eigen::Index source, int d1, std::optional<int> d2,
                             const Matrix& s0, const Matrix& c0, const Matrix& w, int ages,
                             const Matrix& x_end);

/// Cost of a source handed to the tail gain immediately (entry age 0):
/// ‖(C1 + D12 F) s0 W‖² + tr(Wᵀ s1ᵀ x_next s1 W), s1 = (A + B F) s0 + c0.
double tail_only_cost(const StateSpaceModel& plant, const Matrix& f, const Matrix& s0,
                      const Matrix& c0, const Matrix& w, const Matrix& x_next);

/// Lower Cholesky factor W of an innovation covariance, V = W Wᵀ.
Matrix innovation_factor(const Matrix& v);

InputGroups input_groups(const std::vector<SubsystemBlocks>& blocks);

void require_discrete_partitioned(const PartitionedPlant& plant);

/// Block-diagonal LQR gain, each block optimal for its own part of the cost.
Matrix blockdiag_gain(const PartitionedPlant& plant);

/// Column range of the innovation stream of agent i.
inline BlockRange measurement_range(const std::vector<SubsystemBlocks>& blocks, Eigen::Index i) {
  return blocks[static_cast<std::size_t>(i)].measurements;
}

}  // namespace lambda_lqg::detail
