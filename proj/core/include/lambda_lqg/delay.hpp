#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lambda_lqg/linalg.hpp"

namespace lambda_lqg {

/// Integer delays after sampling. d1 is the delay on an agent's own
/// measurement, d2 the delay on the other agent's measurement.
struct DiscreteDelays {
  int d1 = 0;
  int d2 = 0;
  double h = 0.0;
  double residual_self = 0.0;   ///< ceil(τ1/h) − τ1/h when τ1/h is not an integer
  double residual_cross = 0.0;
};

struct DelaySpec {
  double tau_self = 0.0;   ///< τ1, seconds
  double tau_cross = 0.0;  ///< τ2, seconds
  std::optional<DiscreteDelays> discrete;
};

struct DelayReport {
  bool ok = true;
  std::string violation;  ///< names the broken inequality when !ok
};

/// ok iff τ1 = τ2 = 0 or τ1 < τ2 < 2τ1.
DelayReport validate_delays(double tau_self, double tau_cross);

/// d = round(τ/h) when τ/h is within 1e-9 of an integer, ceil(τ/h) otherwise.
/// Re-checks d1 ≤ d2 ≤ 2·d1 after rounding and throws when it broke.
DelaySpec to_discrete(const DelaySpec& spec, double h);

/// Checks the discrete pattern used by synthesis: 0 ≤ d1 ≤ d2. Throws
/// kInvalidArgument otherwise.
void validate_discrete(int d1, int d2);

enum class Agent { kP = 0, kS = 1 };

const char* to_string(Agent a);

/// One measurement stream and the last step of it an agent holds
/// (nullopt when nothing has arrived yet).
struct InformationEntry {
  Agent source;
  std::optional<long> through;
};

/// Agent i holds its own measurements through t − d1 and the other agent's
/// through t − d2.
std::vector<InformationEntry> information_set(Agent agent, long t, int d1, int d2);

/// The two-node delay graph: self loops carry d1, the two cross edges d2.
struct InformationGraph {
  int d1 = 0;
  int d2 = 0;

  /// delays(i, j): steps before agent i sees subsystem j's measurement.
  [[nodiscard]] Eigen::MatrixXi delays() const;
  /// Sparsity of the controller: every entry present.
  [[nodiscard]] Eigen::Matrix<bool, 2, 2> structure() const;
  /// True when every node reaches every other node.
  [[nodiscard]] bool transitive_closure_complete() const;
};

/// Fixed-length FIFO realizing z^{-d}: push(v) returns the value pushed d
/// calls earlier (zero-initialized). A zero-length buffer passes through.
template <typename T>
class DelayBuffer {
 public:
  DelayBuffer(std::size_t length, const T& zero) : slots_(length, zero), zero_(zero) {}

  T push(const T& value) {
    if (slots_.empty()) return value;
    T out = slots_[head_];
    slots_[head_] = value;
    head_ = (head_ + 1) % slots_.size();
    return out;
  }

  /// Value pushed k calls ago for k = 1..length (k = length is next to leave).
  [[nodiscard]] const T& lag(std::size_t k) const {
    return slots_[(head_ + slots_.size() - k) % slots_.size()];
  }
  T& lag(std::size_t k) { return slots_[(head_ + slots_.size() - k) % slots_.size()]; }

  void reset() {
    for (auto& s : slots_) s = zero_;
    head_ = 0;
  }

  [[nodiscard]] std::size_t length() const { return slots_.size(); }

 private:
  std::vector<T> slots_;
  T zero_;
  std::size_t head_ = 0;
};

}  // namespace lambda_lqg
