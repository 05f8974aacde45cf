#pragma once

#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lambda_lqg/delay.hpp"
#include "lambda_lqg/partitioned_plant.hpp"
#include "lambda_lqg/riccati.hpp"

namespace lambda_lqg {

/// Kalman filter data at one time step (or in steady state):
///   V = C P Cᵀ + D21 D21ᵀ          innovation covariance
///   M = P Cᵀ V⁻¹                    x̂(t|t) = x̂(t|t−1) + M e(t)
///   L = (A P Cᵀ + B1 D21ᵀ) V⁻¹      x̂(t+1|t) = A x̂(t|t−1) + B2 u(t) + L e(t)
/// P is the one-step predictor error covariance.
struct KalmanGains {
  Matrix P;
  Matrix L;
  Matrix M;
  Matrix V;
};

/// Gains for a given predictor covariance P, and the next covariance.
KalmanGains kalman_update(const StateSpaceModel& plant, const Matrix& p);
Matrix kalman_next_covariance(const StateSpaceModel& plant, const KalmanGains& g);

/// Stationary filter from the dual DARE (Aᵀ, C2ᵀ, B1ᵀ, D21ᵀ) on the whole
/// realization.
KalmanGains stationary_kalman(const StateSpaceModel& plant);

/// Stationary filter computed subsystem by subsystem; the result is exactly
/// block diagonal.
KalmanGains stationary_kalman(const PartitionedPlant& plant);

/// Centralized observer-based controller. When input_delay > 0 the model
/// (A, B2, C2) is the plant augmented with an input_delay-step measurement
/// chain and the controller feeds measurements through a buffer of the same
/// length before the observer.
///
///   e = y_d − C2 x̂,   u = F (x̂ + M e),   x̂⁺ = A x̂ + B2 u + L e
struct ObserverController {
  Matrix A;
  Matrix B2;
  Matrix C2;
  Matrix F;
  KalmanGains kalman;
  int input_delay = 0;
  Eigen::Index plant_states = 0;
};

/// Agents driven by the innovation streams of the subsystem Kalman filters.
///
/// Agent i runs the filter of its own block on its own measurements, which
/// arrive d1 steps late, and forwards each innovation to the other agent,
/// where it arrives d2 steps after the measurement was taken. The control of
/// agent i at time t is
///
///   u_i(t) = F_i(t) ψ(t) + Σ_{k<D} Θ_{t−k,k}[i, :] e(t−k),
///   ψ(t)   = (A + B F(t−1)) ψ(t−1) + Γ_{t−D} e(t−D) + Γ'_{t−D−1} e(t−D−1),
///
/// where only taps the agent can evaluate (own stream from age d1, the other
/// stream from age d2) are nonzero. Vectors indexed by time hold a single
/// element for stationary laws. For non-communicating laws F is block
/// diagonal, Γ acts within each block and each agent only tracks its own
/// block of ψ.
///
/// Along the nominal trajectory x̂(t|t) = ψ(t) + Σ_{k<D} S_{t−k,k} e(t−k).
/// Each agent compares its own block of that expression with its filtered
/// estimate and feeds the mismatch back through `stabilizer`; the mismatch
/// is zero unless the loop is perturbed, so the gain leaves the input-output
/// behaviour untouched and only makes the realization internally stable.
struct InnovationLaw {
  int d1 = 0;
  int d2 = 0;
  int entry_age = 0;  ///< D
  bool communicating = true;
  Matrix A;
  Matrix B;
  Matrix C;
  std::vector<SubsystemBlocks> blocks;
  std::vector<Matrix> filter_gain;              ///< L(t), block diagonal
  std::vector<Matrix> filter_update;            ///< M(t), block diagonal
  std::vector<Matrix> tail_gain;                ///< F(t)
  std::vector<std::vector<Matrix>> taps;        ///< taps[s][k], m×p
  std::vector<Matrix> entry;                    ///< Γ_s, n×p
  std::vector<Matrix> entry_next;               ///< Γ'_s, nonzero only when D = 0
  std::vector<std::vector<Matrix>> responses;   ///< S[s][k], n×p
  Matrix stabilizer;                            ///< block diagonal, m×n

  [[nodiscard]] bool time_varying() const { return filter_gain.size() > 1; }
  [[nodiscard]] const Matrix& L(long t) const { return pick(filter_gain, t); }
  [[nodiscard]] const Matrix& M(long t) const { return pick(filter_update, t); }
  [[nodiscard]] const Matrix& F(long t) const { return pick(tail_gain, t); }
  [[nodiscard]] const Matrix& response(long s, int k) const { return pick(responses, s)[static_cast<std::size_t>(k)]; }
  [[nodiscard]] const Matrix& tap(long s, int k) const { return pick(taps, s)[static_cast<std::size_t>(k)]; }
  [[nodiscard]] const Matrix& gamma(long s) const { return pick(entry, s); }
  [[nodiscard]] const Matrix& gamma_next(long s) const { return pick(entry_next, s); }
  [[nodiscard]] Eigen::Index agents() const { return static_cast<Eigen::Index>(blocks.size()); }

  void validate() const;

 private:
  template <typename T>
  static const T& pick(const std::vector<T>& v, long t) {
    if (v.size() == 1 || t < 0) return v.front();
    const auto i = static_cast<std::size_t>(t);
    return i < v.size() ? v[i] : v.back();
  }
};

/// Per-agent view of a stationary law: the pieces one agent runs.
struct AgentView {
  Matrix filter_gain;             ///< L_i, n_i×p_i
  Matrix regulator_gain;          ///< rows of F for the agent's inputs
  std::vector<Matrix> own_taps;   ///< ages d1..D−1, m_i×p_i
  std::vector<Matrix> cross_taps; ///< ages d2..D−1, m_i×p_j
  int own_delay = 0;              ///< d1, measurement buffer
  int message_delay = 0;          ///< d2 − d1, incoming innovation channel
};
std::vector<AgentView> agent_views(const InnovationLaw& law);

struct ControllerRealization {
  std::string architecture;
  std::variant<ObserverController, InnovationLaw> body;
  /// Cost predicted by the synthesis itself (NaN when unavailable).
  double predicted_cost = std::numeric_limits<double>::quiet_NaN();
};

/// Delay-free centralized LQG: F from DARE(A, B2, C1, D12), the filter from
/// the dual DARE.
ControllerRealization lqg_delay_free(const StateSpaceModel& plant);

/// Optimal centralized LQG when every measurement arrives d steps late, by
/// augmenting the plant with a d-step measurement chain. d = 0 reproduces
/// lqg_delay_free.
ControllerRealization centralized_delayed_lqg(const StateSpaceModel& plant, int d);

/// Decentralized delayed controller with own delay d1 and cross delay d2.
/// Tail gain F from the centralized DARE; FIR taps from a restricted Riccati
/// recursion over ages 0..d2−1 per innovation source.
ControllerRealization decentralized_delayed_lqg(const PartitionedPlant& plant, int d1, int d2);
ControllerRealization decentralized_delayed_lqg(const PartitionedPlant& plant, const DelaySpec& spec);

/// Agents without communication, each optimal for its own block of the cost
/// with its own measurements delayed d1 steps (the d2 → ∞ limit).
ControllerRealization blockdiag_lqg(const PartitionedPlant& plant, int d1);

/// Structured FIR synthesis: taps G_0..G_{N−1} on the innovations with
/// G_k[i, j] = 0 for k < d_ij, followed by a fixed tail gain on the state
/// driven by innovations older than N, chosen by solving one least-squares
/// problem per innovation source over all taps jointly. cross_delay = nullopt
/// removes the cross taps entirely.
///
/// Innovations older than N ≥ d2 are known to both agents, so the tail may be
/// the centralized LQR gain (the default when cross taps exist). The
/// block-diagonal tail keeps the whole controller decoupled beyond the taps
/// and is the only choice without cross taps.
enum class FirTail { kCentralized, kBlockDiagonal };

struct StructuredSynthesisResult {
  std::vector<Matrix> taps;  ///< G_k, m×p
  int fir_length = 0;
  double objective = 0.0;    ///< least-squares optimum (the predicted H2 cost)
  ControllerRealization controller;
};
StructuredSynthesisResult structured_fir_youla(const PartitionedPlant& plant, int d1,
                                               std::optional<int> cross_delay, int fir_length,
                                               std::optional<FirTail> tail = std::nullopt);

/// Structural mask: allowed(k, input_agent, source_agent).
bool tap_allowed(int age, Eigen::Index input_agent, Eigen::Index source_agent, int d1,
                 std::optional<int> d2);

nlohmann::json to_json(const ControllerRealization& c);
ControllerRealization controller_from_json(const nlohmann::json& doc);

}  // namespace lambda_lqg
