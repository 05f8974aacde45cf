#pragma once

#include <random>
#include <vector>

#include "lambda_lqg/plant_models.hpp"

namespace lambda_lqg::testing {

inline constexpr double kSampleRate = 6000.0;

inline std::vector<SubsystemModel> default_subsystems() {
  return {make_pzt_model({}), make_stepper_model({})};
}

inline PartitionedPlant default_continuous() {
  const auto subs = default_subsystems();
  return assemble_global_plant(subs, build_cost_matrices(subs, 1e-8));
}

inline const PartitionedPlant& default_plant() {
  static const PartitionedPlant p = discretize_plant(default_continuous(), 1.0 / kSampleRate);
  return p;
}

/// Two scalar subsystems x_i⁺ = a_i x_i + u_i + w_i, y_i = x_i + v_i whose
/// cost couples them through (x_1 − x_2)², so coordination matters.
inline PartitionedPlant coupled_scalar_plant(double a1 = 1.05, double a2 = 0.9) {
  auto scalar = [](double a) {
    return StateSpaceModel(Matrix::Constant(1, 1, a), (Matrix(1, 2) << 1.0, 0.0).finished(),
                           Matrix::Ones(1, 1), Matrix::Zero(0, 1), Matrix::Ones(1, 1),
                           Matrix::Zero(0, 1), (Matrix(1, 2) << 0.0, 0.5).finished(), 1.0);
  };
  CostSpec cost;
  cost.wavelength_row = (RowVector(2) << 1.0, -1.0).finished();
  cost.eps_reg = 0.1;
  cost.Q = cost.wavelength_row.transpose() * cost.wavelength_row + 0.1 * Matrix::Identity(2, 2);
  cost.R = Matrix::Identity(2, 2) * 0.2;
  return partition({scalar(a1), scalar(a2)}, {"one", "two"}, cost);
}

/// Random matrix with i.i.d. standard normal entries.
inline Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

}  // namespace lambda_lqg::testing
