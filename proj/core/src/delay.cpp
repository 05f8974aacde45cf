#include "lambda_lqg/delay.hpp"

#include <cmath>
#include <sstream>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

DelayReport validate_delays(double tau_self, double tau_cross) {
  DelayReport r;
  auto bad = [&](std::string what) {
    r.ok = false;
    r.violation = std::move(what);
    return r;
  };
  if (!std::isfinite(tau_self) || !std::isfinite(tau_cross) || tau_self < 0.0 || tau_cross < 0.0) {
    return bad("delays must be finite and nonnegative (τ1 ≥ 0, τ2 ≥ 0)");
  }
  if (tau_self == 0.0 && tau_cross == 0.0) return r;
  if (!(tau_cross > tau_self)) return bad("τ2 > τ1 violated (cross delay must exceed self delay)");
  if (!(2.0 * tau_self > tau_cross)) {
    return bad("2τ1 > τ2 violated (triangle inequality: τ2 < 2τ1)");
  }
  return r;
}

void validate_discrete(int d1, int d2) {
  if (d1 < 0 || d2 < d1) {
    std::ostringstream os;
    os << "discrete delays need 0 <= d1 <= d2, got d1=" << d1 << ", d2=" << d2;
    fail(ErrorCode::kInvalidArgument, os.str());
  }
}

DelaySpec to_discrete(const DelaySpec& spec, double h) {
  if (!(h > 0.0)) fail(ErrorCode::kInvalidArgument, "sample period must be positive");
  const DelayReport report = validate_delays(spec.tau_self, spec.tau_cross);
  if (!report.ok) fail(ErrorCode::kInvalidArgument, report.violation);

  auto steps = [h](double tau, double& residual) {
    const double ratio = tau / h;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9) {
      residual = 0.0;
      return static_cast<int>(nearest);
    }
    const double up = std::ceil(ratio);
    residual = up - ratio;
    return static_cast<int>(up);
  };
  DelaySpec out = spec;
  DiscreteDelays d;
  d.h = h;
  d.d1 = steps(spec.tau_self, d.residual_self);
  d.d2 = steps(spec.tau_cross, d.residual_cross);
  if (d.d1 > d.d2 || d.d2 > 2 * d.d1) {
    std::ostringstream os;
    os << "rounding to h=" << h << " gives d1=" << d.d1 << ", d2=" << d.d2
       << ", which breaks d1 <= d2 <= 2*d1";
    fail(ErrorCode::kInvalidArgument, os.str());
  }
  out.discrete = d;
  return out;
}

const char* to_string(Agent a) { return a == Agent::kP ? "P" : "S"; }

std::vector<InformationEntry> information_set(Agent agent, long t, int d1, int d2) {
  validate_discrete(d1, d2);
  if (t < 0) fail(ErrorCode::kInvalidArgument, "information_set needs t >= 0");
  const Agent other = agent == Agent::kP ? Agent::kS : Agent::kP;
  auto through = [t](int d) -> std::optional<long> {
    if (t - d < 0) return std::nullopt;
    return t - d;
  };
  return {{agent, through(d1)}, {other, through(d2)}};
}

Eigen::MatrixXi InformationGraph::delays() const {
  Eigen::MatrixXi d(2, 2);
  d << d1, d2, d2, d1;
  return d;
}

Eigen::Matrix<bool, 2, 2> InformationGraph::structure() const {
  Eigen::Matrix<bool, 2, 2> s;
  s.setConstant(true);
  return s;
}

bool InformationGraph::transitive_closure_complete() const {
  Eigen::Matrix<bool, 2, 2> r = structure();
  // Boolean closure by repeated squaring (two nodes need one pass).
  Eigen::Matrix<bool, 2, 2> next = r;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) next(i, j) = next(i, j) || (r(i, k) && r(k, j));
    }
  }
  return next.all();
}

}  // namespace lambda_lqg
