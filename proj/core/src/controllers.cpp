#include "lambda_lqg/controllers.hpp"

#include <cmath>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

namespace {

std::size_t to_size(long v) { return static_cast<std::size_t>(std::max(v, 0L)); }

long floor_mod(long a, long b) { return ((a % b) + b) % b; }

}  // namespace

// ---------------------------------------------------------------------------
// Observer

ObserverRuntime::ObserverRuntime(ObserverController design)
    : d_(std::move(design)),
      y_buf_(to_size(d_.input_delay), Vector::Zero(d_.C2.rows())),
      valid_buf_(to_size(d_.input_delay), 1),
      xhat_(Vector::Zero(d_.A.rows())),
      filtered_(Vector::Zero(d_.A.rows())) {
  if (d_.input_delay < 0) fail(ErrorCode::kInvalidArgument, "negative input delay");
}

void ObserverRuntime::reset() {
  y_buf_.reset();
  valid_buf_.reset();
  xhat_.setZero();
  filtered_.setZero();
}

Vector ObserverRuntime::step(const Vector& y, bool measurement_valid) {
  if (y.size() != measurements()) fail(ErrorCode::kDimensionMismatch, "measurement size mismatch");
  const Vector yd = y_buf_.push(y);
  const bool valid = valid_buf_.push(measurement_valid ? 1 : 0) != 0;
  Vector e = Vector::Zero(yd.size());
  if (valid) e = yd - d_.C2 * xhat_;
  filtered_ = xhat_ + d_.kalman.M * e;
  Vector u = d_.F * filtered_;
  xhat_ = d_.A * xhat_ + d_.B2 * u + d_.kalman.L * e;
  return u;
}

std::unique_ptr<RuntimeController> ObserverRuntime::clone() const {
  return std::make_unique<ObserverRuntime>(*this);
}

Vector ObserverRuntime::state() const {
  const Eigen::Index p = d_.C2.rows();
  const auto d = static_cast<Eigen::Index>(y_buf_.length());
  Vector x(d * p + xhat_.size());
  for (Eigen::Index k = 0; k < d; ++k) x.segment(k * p, p) = y_buf_.lag(static_cast<std::size_t>(k + 1));
  x.tail(xhat_.size()) = xhat_;
  return x;
}

void ObserverRuntime::set_state(const Vector& x) {
  const Eigen::Index p = d_.C2.rows();
  const auto d = static_cast<Eigen::Index>(y_buf_.length());
  if (x.size() != d * p + xhat_.size()) fail(ErrorCode::kDimensionMismatch, "observer state size mismatch");
  for (Eigen::Index k = 0; k < d; ++k) {
    y_buf_.lag(static_cast<std::size_t>(k + 1)) = x.segment(k * p, p);
    valid_buf_.lag(static_cast<std::size_t>(k + 1)) = 1;
  }
  xhat_ = x.tail(xhat_.size());
}

// ---------------------------------------------------------------------------
// Agent network

AgentNetworkRuntime::AgentNetworkRuntime(InnovationLaw law) : law_(std::move(law)) {
  law_.validate();
  if (law_.communicating && law_.agents() != 2) {
    fail(ErrorCode::kUnsupportedRepresentation, "communicating laws are implemented for two agents");
  }
  if (law_.communicating && law_.entry_age < law_.d2) {
    fail(ErrorCode::kInvalidArgument, "entry age must not precede the cross delay");
  }
  if (law_.entry_age < law_.d1) {
    fail(ErrorCode::kInvalidArgument, "entry age must not precede the own delay");
  }
  history_ = law_.entry_age + law_.d1 + 2;
  const auto d1 = to_size(law_.d1);
  const auto dx = to_size(law_.d2 - law_.d1);
  for (Eigen::Index i = 0; i < law_.agents(); ++i) {
    const auto& b = law_.blocks[static_cast<std::size_t>(i)];
    const Eigen::Index j = other(i);
    const Eigen::Index pj = j >= 0 ? law_.blocks[static_cast<std::size_t>(j)].measurements.size : 0;
    Agent a{DelayBuffer<Vector>(d1, Vector::Zero(b.measurements.size)),
            DelayBuffer<char>(d1, 1),
            DelayBuffer<Vector>(d1, Vector::Zero(b.inputs.size)),
            DelayBuffer<Vector>(law_.communicating ? dx : 0, Vector::Zero(pj)),
            DelayBuffer<Vector>(d1, Vector::Zero(law_.A.rows())),
            DelayBuffer<Vector>(d1, Vector::Zero(b.inputs.size)),
            Vector::Zero(b.states.size),
            Vector::Zero(law_.A.rows()),
            {}};
    for (Eigen::Index s = 0; s < law_.agents(); ++s) {
      const Eigen::Index ps = law_.blocks[static_cast<std::size_t>(s)].measurements.size;
      a.hist.emplace_back(static_cast<std::size_t>(history_), Vector::Zero(ps));
    }
    agents_.push_back(std::move(a));
  }
}

void AgentNetworkRuntime::reset() {
  for (auto& a : agents_) {
    a.y_buf.reset();
    a.valid_buf.reset();
    a.u_buf.reset();
    a.channel.reset();
    a.psi_buf.reset();
    a.fix_buf.reset();
    a.xhat.setZero();
    a.psi.setZero();
    for (auto& h : a.hist) {
      for (auto& v : h) v.setZero();
    }
  }
  t_ = 0;
}

const Vector& AgentNetworkRuntime::known(const Agent& a, Eigen::Index source, long s) const {
  return a.hist[static_cast<std::size_t>(source)][static_cast<std::size_t>(floor_mod(s, history_))];
}

Vector& AgentNetworkRuntime::slot(Agent& a, Eigen::Index source, long s) {
  return a.hist[static_cast<std::size_t>(source)][static_cast<std::size_t>(floor_mod(s, history_))];
}

const Vector& AgentNetworkRuntime::tail_state(Eigen::Index agent) const {
  return agents_.at(static_cast<std::size_t>(agent)).psi;
}

Vector AgentNetworkRuntime::step(const Vector& y, bool measurement_valid) {
  if (y.size() != measurements()) fail(ErrorCode::kDimensionMismatch, "measurement size mismatch");
  const long t = t_;
  const Eigen::Index na = law_.agents();
  const int d1 = law_.d1;
  const int d2 = law_.d2;
  const int big_d = law_.entry_age;

  // Slots for time t are about to be reused; clear what they held.
  for (auto& a : agents_) {
    for (Eigen::Index s = 0; s < na; ++s) slot(a, s, t).setZero();
  }

  // Own innovations e_i(t − d1).
  std::vector<Vector> e_now(static_cast<std::size_t>(na));
  for (Eigen::Index i = 0; i < na; ++i) {
    auto& a = agents_[static_cast<std::size_t>(i)];
    const auto& b = law_.blocks[static_cast<std::size_t>(i)];
    const Vector yd = a.y_buf.push(y.segment(b.measurements.offset, b.measurements.size));
    const bool valid = a.valid_buf.push(measurement_valid ? 1 : 0) != 0;
    Vector e = Vector::Zero(b.measurements.size);
    if (valid) {
      e = yd - law_.C.block(b.measurements.offset, b.states.offset, b.measurements.size, b.states.size) * a.xhat;
    }
    slot(a, i, t - d1) = e;
    e_now[static_cast<std::size_t>(i)] = std::move(e);
  }

  // Messages: e_j(t − d1) enters the channel, e_j(t − d2) leaves it.
  if (law_.communicating) {
    for (Eigen::Index i = 0; i < na; ++i) {
      auto& a = agents_[static_cast<std::size_t>(i)];
      const Eigen::Index j = other(i);
      slot(a, j, t - d2) = a.channel.push(e_now[static_cast<std::size_t>(j)]);
    }
  }

  Vector u = Vector::Zero(inputs());
  const Matrix& f_prev = law_.F(std::max(t - 1, 0L));
  const Matrix& f_now = law_.F(t);
  for (Eigen::Index i = 0; i < na; ++i) {
    auto& a = agents_[static_cast<std::size_t>(i)];
    const auto& b = law_.blocks[static_cast<std::size_t>(i)];
    auto gather = [&](long s) {
      Vector e = Vector::Zero(law_.C.rows());
      for (Eigen::Index j = 0; j < na; ++j) {
        if (j != i && !law_.communicating) continue;
        const auto& bj = law_.blocks[static_cast<std::size_t>(j)];
        e.segment(bj.measurements.offset, bj.measurements.size) = known(a, j, s);
      }
      return e;
    };
    a.psi = law_.A * a.psi + law_.B * (f_prev * a.psi) + law_.gamma(t - big_d) * gather(t - big_d) +
            law_.gamma_next(t - big_d - 1) * gather(t - big_d - 1);

    Vector ui = f_now.middleRows(b.inputs.offset, b.inputs.size) * a.psi;
    for (int k = d1; k < big_d; ++k) {
      ui += law_.tap(t - k, k).block(b.inputs.offset, b.measurements.offset, b.inputs.size,
                                     b.measurements.size) *
            known(a, i, t - k);
    }
    if (law_.communicating) {
      const Eigen::Index j = other(i);
      const auto& bj = law_.blocks[static_cast<std::size_t>(j)];
      for (int k = d2; k < big_d; ++k) {
        ui += law_.tap(t - k, k).block(b.inputs.offset, bj.measurements.offset, b.inputs.size,
                                       bj.measurements.size) *
              known(a, j, t - k);
      }
    }
    ui += correction(a, i, e_now[static_cast<std::size_t>(i)]);
    u.segment(b.inputs.offset, b.inputs.size) = ui;
  }

  // Block filters advance to x̂_i(t − d1 + 1 | t − d1).
  for (Eigen::Index i = 0; i < na; ++i) {
    auto& a = agents_[static_cast<std::size_t>(i)];
    const auto& b = law_.blocks[static_cast<std::size_t>(i)];
    const Vector u_old = a.u_buf.push(u.segment(b.inputs.offset, b.inputs.size));
    const Matrix& l = law_.L(t - d1);
    a.xhat = law_.A.block(b.states.offset, b.states.offset, b.states.size, b.states.size) * a.xhat +
             law_.B.block(b.states.offset, b.inputs.offset, b.states.size, b.inputs.size) * u_old +
             l.block(b.states.offset, b.measurements.offset, b.states.size, b.measurements.size) *
                 e_now[static_cast<std::size_t>(i)];
  }
  ++t_;
  return u;
}

Vector AgentNetworkRuntime::correction(Agent& a, Eigen::Index i, const Vector& e_own) {
  const auto& b = law_.blocks[static_cast<std::size_t>(i)];
  const long tau = t_ - law_.d1;
  const Vector psi_old = a.psi_buf.push(a.psi);

  // Nominal filtered estimate of the own block at τ = t − d1. Rows of this
  // block respond to the other stream only from age d2 + 1 on, which the
  // agent has already received.
  Vector nominal = psi_old.segment(b.states.offset, b.states.size);
  for (int k = 0; k < law_.entry_age; ++k) {
    for (Eigen::Index j = 0; j < law_.agents(); ++j) {
      if (j != i && (!law_.communicating || law_.d1 + k < law_.d2)) continue;
      const auto& bj = law_.blocks[static_cast<std::size_t>(j)];
      nominal += law_.response(tau - k, k).block(b.states.offset, bj.measurements.offset, b.states.size,
                                                 bj.measurements.size) *
                 known(a, j, tau - k);
    }
  }
  const Matrix& m = law_.M(tau);
  Vector mismatch = a.xhat - nominal +
                    m.block(b.states.offset, b.measurements.offset, b.states.size, b.measurements.size) * e_own;

  // Predict the mismatch forward over the measurement delay.
  const auto aii = law_.A.block(b.states.offset, b.states.offset, b.states.size, b.states.size);
  const auto bii = law_.B.block(b.states.offset, b.inputs.offset, b.states.size, b.inputs.size);
  for (std::size_t k = a.fix_buf.length(); k >= 1; --k) mismatch = aii * mismatch + bii * a.fix_buf.lag(k);

  Vector fix = law_.stabilizer.block(b.inputs.offset, b.states.offset, b.inputs.size, b.states.size) * mismatch;
  a.fix_buf.push(fix);
  return fix;
}

std::unique_ptr<RuntimeController> AgentNetworkRuntime::clone() const {
  return std::make_unique<AgentNetworkRuntime>(*this);
}

template <typename Visit>
void AgentNetworkRuntime::visit_state(Visit&& visit) {
  for (Eigen::Index i = 0; i < law_.agents(); ++i) {
    auto& a = agents_[static_cast<std::size_t>(i)];
    for (std::size_t k = 1; k <= a.y_buf.length(); ++k) {
      visit(a.y_buf.lag(k));
      a.valid_buf.lag(k) = 1;
    }
    for (std::size_t k = 1; k <= a.u_buf.length(); ++k) visit(a.u_buf.lag(k));
    for (std::size_t k = 1; k <= a.channel.length(); ++k) visit(a.channel.lag(k));
    for (std::size_t k = 1; k <= a.psi_buf.length(); ++k) visit(a.psi_buf.lag(k));
    for (std::size_t k = 1; k <= a.fix_buf.length(); ++k) visit(a.fix_buf.lag(k));
    visit(a.xhat);
    visit(a.psi);
    for (Eigen::Index s = 0; s < law_.agents(); ++s) {
      if (s != i && !law_.communicating) continue;
      for (int k = 1; k < history_; ++k) visit(slot(a, s, t_ - k));
    }
  }
}

Vector AgentNetworkRuntime::state() const {
  std::vector<Vector> parts;
  Eigen::Index total = 0;
  // visit_state also marks buffered measurements valid, which is the state
  // every probe assumes; a copy keeps this call free of side effects.
  AgentNetworkRuntime copy = *this;
  copy.visit_state([&](Vector& v) {
    parts.push_back(v);
    total += v.size();
  });
  Vector x(total);
  Eigen::Index o = 0;
  for (const auto& v : parts) {
    x.segment(o, v.size()) = v;
    o += v.size();
  }
  return x;
}

void AgentNetworkRuntime::set_state(const Vector& x) {
  Eigen::Index o = 0;
  visit_state([&](Vector& v) {
    if (o + v.size() > x.size()) fail(ErrorCode::kDimensionMismatch, "agent state size mismatch");
    v = x.segment(o, v.size());
    o += v.size();
  });
  if (o != x.size()) fail(ErrorCode::kDimensionMismatch, "agent state size mismatch");
}

// ---------------------------------------------------------------------------
// Legacy baseline

LegacyDesign design_legacy(const std::vector<SubsystemModel>& subsystems, double h, int delay,
                           const LegacyParams& params) {
  if (subsystems.size() != 2 || subsystems[0].kind != ActuatorKind::kPzt ||
      subsystems[1].kind != ActuatorKind::kStepper) {
    fail(ErrorCode::kInvalidArgument, "legacy baseline needs (PZT, stepper) subsystems");
  }
  if (!(h > 0.0) || delay < 0) fail(ErrorCode::kInvalidArgument, "legacy baseline needs h > 0, delay >= 0");
  if (!(params.fine_loop_gain > 0.0) || !(params.desat_threshold >= 0.0) || !(params.desat_rate >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "legacy gains must be positive and the dead band nonnegative");
  }
  const auto& pzt = subsystems[0];
  const auto& stp = subsystems[1];
  if (pzt.optics_gain == 0.0 || stp.optics_gain == 0.0) {
    fail(ErrorCode::kInvalidArgument, "legacy baseline needs nonzero optics gains");
  }
  // DC gains from command to position: PZT position = k_P·V with V̇ = u_P;
  // stepper position rate = k_S·u_S.
  const double k_p = pzt.model.A(1, 2) / -pzt.model.A(1, 0);
  const double k_s = stp.model.B2(0, 0) / -stp.model.A(0, 0);

  LegacyDesign d;
  d.delay = delay;
  d.h = h;
  d.wavelength_weights = RowVector(2);
  d.wavelength_weights << pzt.optics_gain, stp.optics_gain;
  d.fine_gain = params.fine_loop_gain / (pzt.optics_gain * k_p * h);
  d.desat_threshold = params.desat_threshold;
  d.desat_gain = params.desat_rate * pzt.optics_gain * k_p / (stp.optics_gain * k_s);
  d.pzt_input = 0;
  d.stepper_input = 1;
  d.inputs = 2;
  return d;
}

LegacyRuntime::LegacyRuntime(LegacyDesign design)
    : d_(std::move(design)),
      y_buf_(to_size(d_.delay), Vector::Zero(d_.wavelength_weights.size())),
      valid_buf_(to_size(d_.delay), 0) {}

void LegacyRuntime::reset() {
  y_buf_.reset();
  valid_buf_.reset();
  drive_ = 0.0;
}

Vector LegacyRuntime::step(const Vector& y, bool measurement_valid) {
  if (y.size() != measurements()) fail(ErrorCode::kDimensionMismatch, "measurement size mismatch");
  const Vector yd = y_buf_.push(y);
  const bool valid = valid_buf_.push(measurement_valid ? 1 : 0) != 0;
  Vector u = Vector::Zero(d_.inputs);
  if (valid) u(d_.pzt_input) = -d_.fine_gain * d_.wavelength_weights.dot(yd);
  if (std::abs(drive_) > d_.desat_threshold) u(d_.stepper_input) = d_.desat_gain * drive_;
  drive_ += d_.h * u(d_.pzt_input);
  return u;
}

std::unique_ptr<RuntimeController> LegacyRuntime::clone() const {
  return std::make_unique<LegacyRuntime>(*this);
}

// ---------------------------------------------------------------------------

std::unique_ptr<RuntimeController> instantiate(const ControllerRealization& c) {
  if (const auto* o = std::get_if<ObserverController>(&c.body)) {
    return std::make_unique<ObserverRuntime>(*o);
  }
  return std::make_unique<AgentNetworkRuntime>(std::get<InnovationLaw>(c.body));
}

LinearController realize(const RuntimeController& controller) {
  if (!controller.is_linear()) {
    fail(ErrorCode::kUnsupportedRepresentation, "only linear time-invariant controllers can be realized");
  }
  auto k = controller.clone();
  k->reset();
  const Eigen::Index nx = k->state().size();
  const Eigen::Index p = k->measurements();
  const Eigen::Index m = k->inputs();
  LinearController out{Matrix(nx, nx), Matrix(nx, p), Matrix(m, nx), Matrix(m, p)};
  const Vector y0 = Vector::Zero(p);
  for (Eigen::Index j = 0; j < nx; ++j) {
    k->reset();
    k->set_state(Vector::Unit(nx, j));
    out.C.col(j) = k->step(y0, true);
    out.A.col(j) = k->state();
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    k->reset();
    k->set_state(Vector::Zero(nx));
    out.D.col(j) = k->step(Vector::Unit(p, j), true);
    out.B.col(j) = k->state();
  }
  return out;
}

LinearController realize(const ControllerRealization& c) { return realize(*instantiate(c)); }

}  // namespace lambda_lqg
