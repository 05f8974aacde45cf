#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lambda_lqg/state_space.hpp"

namespace lambda_lqg {

/// Quadratic cost on the stacked state and input.
struct CostSpec {
  Matrix Q;                   ///< N×N, Q = cλᵀcλ + eps_reg·I
  Matrix R;                   ///< diag(ρ_P, ρ_S)
  RowVector wavelength_row;   ///< cλ: wavelength error = cλ x
  double eps_reg = 0.0;
  std::vector<std::string> warnings;
};

/// Stacked plant whose A, B1, B2, C2, D21 are block diagonal with respect to
/// `blocks`; C1 and D12 may couple the blocks.
struct PartitionedPlant {
  StateSpaceModel realization;
  std::vector<SubsystemBlocks> blocks;
  std::vector<std::string> names;
  std::optional<CostSpec> cost;

  [[nodiscard]] Eigen::Index subsystems() const {
    return static_cast<Eigen::Index>(blocks.size());
  }

  /// True when every off-diagonal block of A, B1, B2, C2 and D21 is exactly
  /// zero.
  [[nodiscard]] bool is_block_diagonal() const;

  /// Sparsity pattern S of the dynamics: S(i, j) is true when subsystem j
  /// influences subsystem i.
  [[nodiscard]] Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> structure() const;

  /// Extracts subsystem i (its diagonal blocks; C1/D12 are dropped).
  [[nodiscard]] StateSpaceModel subsystem(Eigen::Index i) const;

  void validate() const;
};

/// Builds a partitioned plant from subsystem realizations and a cost. Each
/// subsystem contributes its A, B1, B2, C2, D21; C1 = [Q^½; 0] and
/// D12 = [0; R^½].
PartitionedPlant partition(const std::vector<StateSpaceModel>& subsystems,
                           std::vector<std::string> names, const CostSpec& cost);

/// Regulated output factors for a cost: C1ᵀC1 = Q, D12ᵀD12 = R, C1ᵀD12 = 0.
void regulated_output_from_cost(const CostSpec& cost, Eigen::Index inputs, Matrix& c1, Matrix& d12);

/// Zero-order-hold discretization done subsystem by subsystem so that the
/// result stays exactly block diagonal. The cost is carried over unchanged as
/// a per-sample weight.
PartitionedPlant discretize_plant(const PartitionedPlant& plant, double h);

}  // namespace lambda_lqg
