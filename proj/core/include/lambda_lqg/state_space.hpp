#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lambda_lqg/linalg.hpp"

namespace lambda_lqg {

/// Generalized plant realization
///
///   x⁺ (or ẋ) = A x + B1 w + B2 u
///   z         = C1 x + D11 w + D12 u
///   y         = C2 x + D21 w
///
/// D22 is identically zero throughout the toolkit. A model is discrete when
/// it carries a sample period and continuous otherwise.
struct StateSpaceModel {
  Matrix A;
  Matrix B1;
  Matrix B2;
  Matrix C1;
  Matrix C2;
  Matrix D11;
  Matrix D12;
  Matrix D21;
  std::optional<double> sample_period;

  StateSpaceModel() = default;

  /// Builds a model and checks dimensional consistency. D11 defaults to zero.
  StateSpaceModel(Matrix a, Matrix b1, Matrix b2, Matrix c1, Matrix c2, Matrix d12,
                  Matrix d21, std::optional<double> h = std::nullopt);

  [[nodiscard]] Eigen::Index states() const { return A.rows(); }
  [[nodiscard]] Eigen::Index noise_inputs() const { return B1.cols(); }
  [[nodiscard]] Eigen::Index control_inputs() const { return B2.cols(); }
  [[nodiscard]] Eigen::Index regulated_outputs() const { return C1.rows(); }
  [[nodiscard]] Eigen::Index measurements() const { return C2.rows(); }
  [[nodiscard]] bool is_discrete() const { return sample_period.has_value(); }
  [[nodiscard]] TimeDomain domain() const {
    return is_discrete() ? TimeDomain::kDiscrete : TimeDomain::kContinuous;
  }

  /// Throws kDimensionMismatch / kInvalidArgument on inconsistent shapes or a
  /// non-positive sample period.
  void validate() const;

  /// Additionally requires n, m, p ≥ 1 and positive definite D12ᵀD12 and
  /// D21D21ᵀ.
  void validate_for_synthesis() const;
};

/// Discrete linear controller ξ⁺ = A ξ + B y, u = C ξ + D y. Delay buffers
/// must already be part of ξ.
struct LinearController {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;

  [[nodiscard]] Eigen::Index states() const { return A.rows(); }
  [[nodiscard]] Eigen::Index inputs() const { return B.cols(); }
  [[nodiscard]] Eigen::Index outputs() const { return C.rows(); }
  void validate() const;

  /// Zero controller with the given input/output dimensions.
  static LinearController zero(Eigen::Index inputs, Eigen::Index outputs);
  /// Static gain u = D y.
  static LinearController static_gain(const Matrix& d);

  /// Markov parameters h[0] = D, h[k] = C A^(k-1) B for k = 1..count-1.
  [[nodiscard]] std::vector<Matrix> markov_parameters(int count) const;
};

/// Index ranges of one subsystem inside a stacked realization.
struct BlockRange {
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  bool operator==(const BlockRange&) const = default;
};

struct SubsystemBlocks {
  BlockRange states;
  BlockRange noise;
  BlockRange inputs;
  BlockRange measurements;
  bool operator==(const SubsystemBlocks&) const = default;
};

/// Stacks models along the block diagonal of every matrix. Throws
/// kDomainMismatch when the models do not share their time domain.
StateSpaceModel block_diag(const std::vector<StateSpaceModel>& models);

/// Block boundaries that block_diag(models) produces.
std::vector<SubsystemBlocks> block_boundaries(const std::vector<StateSpaceModel>& models);

/// Lower linear fractional interconnection of a discrete plant with a discrete
/// controller. The result maps w to z; its B2/C2/D12/D21 are empty.
StateSpaceModel close_loop(const StateSpaceModel& plant, const LinearController& controller);

struct DiscreteNoise {
  Matrix process;      ///< ∫₀ʰ e^{Aτ} B1 B1ᵀ e^{Aᵀτ} dτ
  Matrix measurement;  ///< D21 D21ᵀ / h
};

/// Zero-order-hold discretization. A and B2 come from one augmented matrix
/// exponential, which stays valid when A is singular. The noise is resampled
/// through discretize_noise and exposed as independent process and
/// measurement channels: B1d = [Qd^½ 0], D21d = [0 Rd^½].
StateSpaceModel discretize_zoh(const StateSpaceModel& model, double h);

/// Van Loan integral for the process noise and the 1/h scaling for sampled
/// white measurement noise.
DiscreteNoise discretize_noise(const StateSpaceModel& model, double h);

/// Matrix exponential (scaling and squaring with a Padé approximant).
Matrix expm(const Matrix& m);

nlohmann::json to_json(const StateSpaceModel& model);
StateSpaceModel state_space_from_json(const nlohmann::json& doc);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& doc, Eigen::Index cols_if_empty = 0);

}  // namespace lambda_lqg
