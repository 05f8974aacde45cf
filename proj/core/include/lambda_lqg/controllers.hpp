#pragma once

#include <memory>
#include <vector>

#include "lambda_lqg/delay.hpp"
#include "lambda_lqg/plant_models.hpp"
#include "lambda_lqg/synthesis.hpp"

namespace lambda_lqg {

/// A controller stepped once per sample. During inter-burst gaps the
/// measurement is flagged invalid; filters then predict without correction
/// while buffers keep advancing.
class RuntimeController {
 public:
  virtual ~RuntimeController() = default;

  virtual void reset() = 0;
  virtual Vector step(const Vector& y, bool measurement_valid) = 0;
  [[nodiscard]] virtual std::unique_ptr<RuntimeController> clone() const = 0;
  [[nodiscard]] virtual Eigen::Index measurements() const = 0;
  [[nodiscard]] virtual Eigen::Index inputs() const = 0;

  /// Linear time-invariant controllers expose their internal state so that
  /// an exact state-space realization can be read off by probing.
  [[nodiscard]] virtual bool is_linear() const { return false; }
  [[nodiscard]] virtual Vector state() const { return {}; }
  virtual void set_state(const Vector& /*x*/) {}
};

class ObserverRuntime final : public RuntimeController {
 public:
  explicit ObserverRuntime(ObserverController design);

  void reset() override;
  Vector step(const Vector& y, bool measurement_valid) override;
  [[nodiscard]] std::unique_ptr<RuntimeController> clone() const override;
  [[nodiscard]] Eigen::Index measurements() const override { return d_.C2.rows(); }
  [[nodiscard]] Eigen::Index inputs() const override { return d_.B2.cols(); }
  [[nodiscard]] bool is_linear() const override { return true; }
  [[nodiscard]] Vector state() const override;
  void set_state(const Vector& x) override;

  /// Current filtered estimate x̂(t|t) of the plant states from the last step.
  [[nodiscard]] const Vector& filtered_estimate() const { return filtered_; }

 private:
  ObserverController d_;
  DelayBuffer<Vector> y_buf_;
  DelayBuffer<char> valid_buf_;
  Vector xhat_;
  Vector filtered_;
};

/// Two (or more) agents executing an InnovationLaw, each with its own
/// measurement buffer, block filter, innovation history, message channel and
/// copy of the tail state ψ.
class AgentNetworkRuntime final : public RuntimeController {
 public:
  explicit AgentNetworkRuntime(InnovationLaw law);

  void reset() override;
  Vector step(const Vector& y, bool measurement_valid) override;
  [[nodiscard]] std::unique_ptr<RuntimeController> clone() const override;
  [[nodiscard]] Eigen::Index measurements() const override { return law_.C.rows(); }
  [[nodiscard]] Eigen::Index inputs() const override { return law_.B.cols(); }
  [[nodiscard]] bool is_linear() const override { return !law_.time_varying(); }
  [[nodiscard]] Vector state() const override;
  void set_state(const Vector& x) override;

  /// Agent i's copy of ψ after the last step.
  [[nodiscard]] const Vector& tail_state(Eigen::Index agent) const;
  [[nodiscard]] const InnovationLaw& law() const { return law_; }

 private:
  struct Agent {
    DelayBuffer<Vector> y_buf;
    DelayBuffer<char> valid_buf;
    DelayBuffer<Vector> u_buf;
    DelayBuffer<Vector> channel;  // incoming innovations of the other agent
    DelayBuffer<Vector> psi_buf;  // ψ over the last d1 steps
    DelayBuffer<Vector> fix_buf;  // stabilizing corrections over the last d1 steps
    Vector xhat;
    Vector psi;
    // hist[j][(s mod H)] holds e_j(s) once the agent knows it.
    std::vector<std::vector<Vector>> hist;
  };

  [[nodiscard]] const Vector& known(const Agent& a, Eigen::Index source, long s) const;
  Vector& slot(Agent& a, Eigen::Index source, long s);
  // Stabilizing feedback on the gap between the agent's filtered estimate
  // and its nominal value; zero along nominal trajectories.
  Vector correction(Agent& a, Eigen::Index i, const Vector& e_own);
  [[nodiscard]] Eigen::Index other(Eigen::Index i) const { return law_.agents() == 2 ? 1 - i : -1; }

  template <typename Visit>
  void visit_state(Visit&& v);

  InnovationLaw law_;
  std::vector<Agent> agents_;
  long t_ = 0;
  int history_ = 1;
};

/// Coarse/fine desaturation baseline without a model-based design: the PZT
/// integrates the delayed wavelength reading, and the stepper moves only when
/// the PZT drive voltage (tracked by integrating the PZT commands) leaves a
/// dead band, in which case it offloads that voltage.
struct LegacyParams {
  double fine_loop_gain = 1e-3;   ///< wavelength correction per sample, fraction of error (≈1 Hz at 6 kHz)
  double desat_threshold = 0.05;  ///< dead band on the PZT drive, volts
  double desat_rate = 2.0;        ///< offload bandwidth, 1/s
};

struct LegacyDesign {
  int delay = 0;                  ///< measurement delay, steps
  double h = 0.0;
  RowVector wavelength_weights;   ///< λ̂ = weights · y
  double fine_gain = 0.0;         ///< u_P = −fine_gain · λ̂
  double desat_threshold = 0.0;
  double desat_gain = 0.0;        ///< u_S = desat_gain · V̂ outside the dead band
  Eigen::Index pzt_input = 0;
  Eigen::Index stepper_input = 1;
  Eigen::Index inputs = 2;
};

LegacyDesign design_legacy(const std::vector<SubsystemModel>& subsystems, double h, int delay,
                           const LegacyParams& params);

class LegacyRuntime final : public RuntimeController {
 public:
  explicit LegacyRuntime(LegacyDesign design);

  void reset() override;
  Vector step(const Vector& y, bool measurement_valid) override;
  [[nodiscard]] std::unique_ptr<RuntimeController> clone() const override;
  [[nodiscard]] Eigen::Index measurements() const override { return d_.wavelength_weights.size(); }
  [[nodiscard]] Eigen::Index inputs() const override { return d_.inputs; }

 private:
  LegacyDesign d_;
  DelayBuffer<Vector> y_buf_;
  DelayBuffer<char> valid_buf_;
  double drive_ = 0.0;
};

std::unique_ptr<RuntimeController> instantiate(const ControllerRealization& c);

/// Reads the state-space matrices off a linear runtime controller by
/// stepping it from unit states and unit measurements.
LinearController realize(const RuntimeController& controller);
LinearController realize(const ControllerRealization& c);

}  // namespace lambda_lqg
