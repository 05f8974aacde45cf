#include "lambda_lqg/synthesis.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lambda_lqg/controllers.hpp"
#include "lambda_lqg/errors.hpp"
#include "response.hpp"

namespace lambda_lqg {

namespace detail {

namespace {

std::vector<Eigen::Index> allowed_columns(const InputGroups& groups, int age, Eigen::Index source,
                                          int d1, std::optional<int> d2) {
  std::vector<Eigen::Index> cols;
  for (std::size_t g = 0; g < groups.inputs.size(); ++g) {
    if (!tap_allowed(age, static_cast<Eigen::Index>(g), source, d1, d2)) continue;
    for (Eigen::Index c = 0; c < groups.inputs[g].size; ++c) cols.push_back(groups.inputs[g].offset + c);
  }
  return cols;
}

Matrix take_columns(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

}  // namespace

Response restricted_response(const StateSpaceModel& plant, const InputGroups& groups,
                             Eigen::Index source, int d1, std::optional<int> d2,
                             const Matrix& s0, const Matrix& c0, const Matrix& w, int ages,
                             const Matrix& x_end) {
  const Matrix& a = plant.A;
  const Matrix& b = plant.B2;
  const Matrix& c1 = plant.C1;
  const Matrix& d12 = plant.D12;
  const Eigen::Index m = b.cols();

  std::vector<std::vector<Eigen::Index>> cols(static_cast<std::size_t>(std::max(ages, 0)));
  for (int k = 0; k < ages; ++k) cols[static_cast<std::size_t>(k)] = allowed_columns(groups, k, source, d1, d2);

  // Cost-to-go weights at ages 1..K (age 0 carries the affine term c0 and is
  // handled in the forward pass).
  std::vector<Matrix> x(static_cast<std::size_t>(ages + 1));
  x[static_cast<std::size_t>(ages)] = x_end;
  for (int k = ages - 1; k >= 1; --k) {
    const auto& ck = cols[static_cast<std::size_t>(k)];
    const Matrix& xn = x[static_cast<std::size_t>(k + 1)];
    if (ck.empty()) {
      x[static_cast<std::size_t>(k)] = symmetrize(a.transpose() * xn * a + c1.transpose() * c1);
    } else {
      x[static_cast<std::size_t>(k)] =
          riccati_step({a, take_columns(b, ck), c1, take_columns(d12, ck)}, xn).X;
    }
  }

  Response r;
  Matrix s = s0;
  for (int k = 0; k < ages; ++k) {
    const auto& ck = cols[static_cast<std::size_t>(k)];
    const Matrix& xn = x[static_cast<std::size_t>(k + 1)];
    Matrix drift = a * s;
    if (k == 0) drift += c0;
    Matrix u = Matrix::Zero(m, s.cols());
    if (!ck.empty()) {
      const Matrix bs = take_columns(b, ck);
      const Matrix ds = take_columns(d12, ck);
      const Matrix h = ds.transpose() * ds + bs.transpose() * xn * bs;
      const Matrix g = ds.transpose() * c1 * s + bs.transpose() * xn * drift;
      const Matrix us = -h.llt().solve(g);
      for (std::size_t j = 0; j < ck.size(); ++j) u.row(ck[j]) = us.row(static_cast<Eigen::Index>(j));
    }
    r.cost += ((c1 * s + d12 * u) * w).squaredNorm();
    r.states.push_back(s);
    s = drift + b * u;
    r.taps.push_back(std::move(u));
  }
  r.cost += (w.transpose() * s.transpose() * x_end * s * w).trace();
  r.end_state = std::move(s);
  return r;
}

double tail_only_cost(const StateSpaceModel& plant, const Matrix& f, const Matrix& s0,
                      const Matrix& c0, const Matrix& w, const Matrix& x_next) {
  const Matrix z = (plant.C1 + plant.D12 * f) * s0 * w;
  const Matrix s1 = ((plant.A + plant.B2 * f) * s0 + c0) * w;
  return z.squaredNorm() + (s1.transpose() * x_next * s1).trace();
}

Matrix innovation_factor(const Matrix& v) {
  Eigen::LLT<Matrix> llt(symmetrize(v));
  if (llt.info() != Eigen::Success) fail(ErrorCode::kIllPosed, "innovation covariance is not positive definite");
  return llt.matrixL();
}

InputGroups input_groups(const std::vector<SubsystemBlocks>& blocks) {
  InputGroups g;
  for (const auto& b : blocks) g.inputs.push_back(b.inputs);
  return g;
}

void require_discrete_partitioned(const PartitionedPlant& plant) {
  plant.validate();
  if (!plant.realization.is_discrete()) {
    fail(ErrorCode::kDomainMismatch, "synthesis needs a discretized plant");
  }
  plant.realization.validate_for_synthesis();
}

}  // namespace detail

namespace {

using detail::InputGroups;
using detail::innovation_factor;
using detail::input_groups;
using detail::require_discrete_partitioned;

// tr(C1 (P − M V Mᵀ) C1ᵀ): the part of the cost no controller can remove.
double estimation_floor(const StateSpaceModel& plant, const KalmanGains& k) {
  const Matrix pf = k.P - k.M * k.V * k.M.transpose();
  return (plant.C1 * pf * plant.C1.transpose()).trace();
}

double observer_predicted_cost(const StateSpaceModel& model, const Matrix& f, const KalmanGains& k,
                               const Matrix& x) {
  const Matrix w = innovation_factor(k.V);
  const Matrix c0 = k.L - model.A * k.M;
  return estimation_floor(model, k) + detail::tail_only_cost(model, f, k.M, c0, w, x);
}

StateSpaceModel measurement_delay_augmentation(const StateSpaceModel& plant, int d) {
  const Eigen::Index n = plant.states();
  const Eigen::Index p = plant.measurements();
  const Eigen::Index na = n + p * d;
  StateSpaceModel a;
  a.A = Matrix::Zero(na, na);
  a.A.topLeftCorner(n, n) = plant.A;
  a.A.block(n, 0, p, n) = plant.C2;
  for (int k = 1; k < d; ++k) {
    a.A.block(n + k * p, n + (k - 1) * p, p, p) = Matrix::Identity(p, p);
  }
  a.B1 = Matrix::Zero(na, plant.noise_inputs());
  a.B1.topRows(n) = plant.B1;
  a.B2 = Matrix::Zero(na, plant.control_inputs());
  a.B2.topRows(n) = plant.B2;
  a.C1 = Matrix::Zero(plant.regulated_outputs(), na);
  a.C1.leftCols(n) = plant.C1;
  a.C2 = Matrix::Zero(p, na);
  a.C2.rightCols(p) = Matrix::Identity(p, p);
  a.D11 = plant.D11;
  a.D12 = plant.D12;
  a.D21 = plant.D21;
  a.sample_period = plant.sample_period;
  a.validate();
  return a;
}

struct TailDesign {
  Matrix F;
  Matrix X;
};

TailDesign centralized_tail(const StateSpaceModel& plant) {
  const AreSolution s = solve_dare({plant.A, plant.B2, plant.C1, plant.D12});
  return {s.F, s.X};
}

TailDesign blockdiag_tail(const PartitionedPlant& plant) {
  const auto& r = plant.realization;
  TailDesign t;
  t.F = Matrix::Zero(r.control_inputs(), r.states());
  t.X = Matrix::Zero(r.states(), r.states());
  for (const auto& b : plant.blocks) {
    const auto& xs = b.states;
    const auto& us = b.inputs;
    const AreSolution s = solve_dare({r.A.block(xs.offset, xs.offset, xs.size, xs.size),
                                      r.B2.block(xs.offset, us.offset, xs.size, us.size),
                                      r.C1.middleCols(xs.offset, xs.size),
                                      r.D12.middleCols(us.offset, us.size)});
    t.F.block(us.offset, xs.offset, us.size, xs.size) = s.F;
  }
  // The per-block Riccati solutions miss the cross terms of C1ᵀC1; the
  // cost-to-go of the coupled cost under the block gains does not.
  const Matrix acl = r.A + r.B2 * t.F;
  const Matrix ccl = r.C1 + r.D12 * t.F;
  t.X = solve_lyapunov(acl.transpose(), ccl.transpose() * ccl, TimeDomain::kDiscrete);
  return t;
}

// Stationary innovation law with entry age D and the given tail design.
ControllerRealization stationary_law(const PartitionedPlant& plant, int d1, std::optional<int> d2,
                                     int entry_age, const TailDesign& tail, const Matrix& stabilizer,
                                     std::string name) {
  const auto& r = plant.realization;
  const KalmanGains k = stationary_kalman(plant);
  const Eigen::Index n = r.states();
  const Eigen::Index m = r.control_inputs();
  const Eigen::Index p = r.measurements();
  const InputGroups groups = input_groups(plant.blocks);

  InnovationLaw law;
  law.d1 = d1;
  law.d2 = d2.value_or(d1);
  law.entry_age = entry_age;
  law.communicating = d2.has_value();
  law.A = r.A;
  law.B = r.B2;
  law.C = r.C2;
  law.blocks = plant.blocks;
  law.filter_gain = {k.L};
  law.filter_update = {k.M};
  law.tail_gain = {tail.F};
  law.taps = {std::vector<Matrix>(static_cast<std::size_t>(entry_age), Matrix::Zero(m, p))};
  law.responses = {std::vector<Matrix>(static_cast<std::size_t>(entry_age), Matrix::Zero(n, p))};
  law.entry = {Matrix::Zero(n, p)};
  law.entry_next = {Matrix::Zero(n, p)};
  law.stabilizer = stabilizer;

  double cost = estimation_floor(r, k);
  for (Eigen::Index i = 0; i < plant.subsystems(); ++i) {
    const BlockRange y = detail::measurement_range(plant.blocks, i);
    const Matrix s0 = k.M.middleCols(y.offset, y.size);
    const Matrix c0 = k.L.middleCols(y.offset, y.size) - r.A * s0;
    const Matrix w = innovation_factor(k.V.block(y.offset, y.offset, y.size, y.size));
    if (entry_age == 0) {
      law.entry.front().middleCols(y.offset, y.size) = s0;
      law.entry_next.front().middleCols(y.offset, y.size) = c0;
      cost += detail::tail_only_cost(r, tail.F, s0, c0, w, tail.X);
      continue;
    }
    const detail::Response resp =
        detail::restricted_response(r, groups, i, d1, d2, s0, c0, w, entry_age, tail.X);
    for (int a = 0; a < entry_age; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      law.taps.front()[ua].middleCols(y.offset, y.size) = resp.taps[ua];
      law.responses.front()[ua].middleCols(y.offset, y.size) = resp.states[ua];
    }
    law.entry.front().middleCols(y.offset, y.size) = resp.end_state;
    cost += resp.cost;
  }
  law.validate();
  return {std::move(name), std::move(law), cost};
}

}  // namespace

Matrix detail::blockdiag_gain(const PartitionedPlant& plant) { return blockdiag_tail(plant).F; }

KalmanGains kalman_update(const StateSpaceModel& plant, const Matrix& p) {
  KalmanGains g;
  g.P = symmetrize(p);
  g.V = symmetrize(plant.C2 * g.P * plant.C2.transpose() + plant.D21 * plant.D21.transpose());
  Eigen::LLT<Matrix> llt(g.V);
  if (llt.info() != Eigen::Success) fail(ErrorCode::kIllPosed, "innovation covariance is not positive definite");
  g.M = llt.solve(plant.C2 * g.P).transpose();
  g.L = llt.solve(plant.C2 * g.P * plant.A.transpose() + plant.D21 * plant.B1.transpose()).transpose();
  return g;
}

Matrix kalman_next_covariance(const StateSpaceModel& plant, const KalmanGains& g) {
  return symmetrize(plant.A * g.P * plant.A.transpose() + plant.B1 * plant.B1.transpose() -
                    g.L * g.V * g.L.transpose());
}

KalmanGains stationary_kalman(const StateSpaceModel& plant) {
  plant.validate();
  const AreSolution dual = solve_dare({plant.A.transpose(), plant.C2.transpose(),
                                       plant.B1.transpose(), plant.D21.transpose()});
  return kalman_update(plant, dual.X);
}

KalmanGains stationary_kalman(const PartitionedPlant& plant) {
  plant.validate();
  const auto& r = plant.realization;
  Matrix p = Matrix::Zero(r.states(), r.states());
  for (Eigen::Index i = 0; i < plant.subsystems(); ++i) {
    const auto& xs = plant.blocks[static_cast<std::size_t>(i)].states;
    p.block(xs.offset, xs.offset, xs.size, xs.size) = stationary_kalman(plant.subsystem(i)).P;
  }
  KalmanGains g;
  g.P = p;
  g.V = Matrix::Zero(r.measurements(), r.measurements());
  g.M = Matrix::Zero(r.states(), r.measurements());
  g.L = Matrix::Zero(r.states(), r.measurements());
  for (Eigen::Index i = 0; i < plant.subsystems(); ++i) {
    const auto& b = plant.blocks[static_cast<std::size_t>(i)];
    const KalmanGains gi =
        kalman_update(plant.subsystem(i), p.block(b.states.offset, b.states.offset, b.states.size, b.states.size));
    g.V.block(b.measurements.offset, b.measurements.offset, b.measurements.size, b.measurements.size) = gi.V;
    g.M.block(b.states.offset, b.measurements.offset, b.states.size, b.measurements.size) = gi.M;
    g.L.block(b.states.offset, b.measurements.offset, b.states.size, b.measurements.size) = gi.L;
  }
  return g;
}

void InnovationLaw::validate() const {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  const Eigen::Index p = C.rows();
  validate_discrete(d1, d2);
  if (entry_age < 0) fail(ErrorCode::kInvalidArgument, "entry age must be nonnegative");
  if (A.cols() != n || B.rows() != n || C.cols() != n) {
    fail(ErrorCode::kDimensionMismatch, "innovation law model matrices are inconsistent");
  }
  if (filter_gain.empty() || filter_update.empty() || tail_gain.empty() || taps.empty() ||
      entry.empty() || entry_next.empty() || responses.empty()) {
    fail(ErrorCode::kInvalidArgument, "innovation law is missing gains");
  }
  for (const auto* v : {&filter_gain, &filter_update}) {
    for (const auto& l : *v) {
      if (l.rows() != n || l.cols() != p) fail(ErrorCode::kDimensionMismatch, "filter gains must be n x p");
    }
  }
  if (stabilizer.rows() != m || stabilizer.cols() != n) {
    fail(ErrorCode::kDimensionMismatch, "stabilizer must be m x n");
  }
  for (const auto& row : responses) {
    if (static_cast<int>(row.size()) != entry_age) {
      fail(ErrorCode::kDimensionMismatch, "response array length must equal the entry age");
    }
    for (const auto& r : row) {
      if (r.rows() != n || r.cols() != p) fail(ErrorCode::kDimensionMismatch, "responses must be n x p");
    }
  }
  for (const auto& f : tail_gain) {
    if (f.rows() != m || f.cols() != n) fail(ErrorCode::kDimensionMismatch, "tail gain must be m x n");
  }
  for (const auto& row : taps) {
    if (static_cast<int>(row.size()) != entry_age) {
      fail(ErrorCode::kDimensionMismatch, "tap array length must equal the entry age");
    }
    for (const auto& t : row) {
      if (t.rows() != m || t.cols() != p) fail(ErrorCode::kDimensionMismatch, "taps must be m x p");
    }
  }
  for (const auto* v : {&entry, &entry_next}) {
    for (const auto& g : *v) {
      if (g.rows() != n || g.cols() != p) fail(ErrorCode::kDimensionMismatch, "entry maps must be n x p");
    }
  }
  Eigen::Index nn = 0, mm = 0, pp = 0;
  for (const auto& b : blocks) {
    nn += b.states.size;
    mm += b.inputs.size;
    pp += b.measurements.size;
  }
  if (nn != n || mm != m || pp != p) fail(ErrorCode::kDimensionMismatch, "blocks do not cover the law");
}

std::vector<AgentView> agent_views(const InnovationLaw& law) {
  std::vector<AgentView> out;
  for (Eigen::Index i = 0; i < law.agents(); ++i) {
    const auto& b = law.blocks[static_cast<std::size_t>(i)];
    AgentView v;
    v.filter_gain = law.L(0).block(b.states.offset, b.measurements.offset, b.states.size, b.measurements.size);
    v.regulator_gain = law.F(0).middleRows(b.inputs.offset, b.inputs.size);
    v.own_delay = law.d1;
    v.message_delay = law.communicating ? law.d2 - law.d1 : 0;
    for (int k = law.d1; k < law.entry_age; ++k) {
      v.own_taps.push_back(law.tap(0, k).block(b.inputs.offset, b.measurements.offset, b.inputs.size,
                                               b.measurements.size));
    }
    if (law.communicating) {
      for (Eigen::Index j = 0; j < law.agents(); ++j) {
        if (j == i) continue;
        const auto& bj = law.blocks[static_cast<std::size_t>(j)];
        for (int k = law.d2; k < law.entry_age; ++k) {
          v.cross_taps.push_back(law.tap(0, k).block(b.inputs.offset, bj.measurements.offset,
                                                     b.inputs.size, bj.measurements.size));
        }
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

bool tap_allowed(int age, Eigen::Index input_agent, Eigen::Index source_agent, int d1,
                 std::optional<int> d2) {
  if (input_agent == source_agent) return age >= d1;
  return d2.has_value() && age >= *d2;
}

ControllerRealization lqg_delay_free(const StateSpaceModel& plant) {
  plant.validate_for_synthesis();
  if (!plant.is_discrete()) fail(ErrorCode::kDomainMismatch, "synthesis needs a discretized plant");
  const AreSolution reg = solve_dare({plant.A, plant.B2, plant.C1, plant.D12});
  ObserverController c;
  c.A = plant.A;
  c.B2 = plant.B2;
  c.C2 = plant.C2;
  c.F = reg.F;
  c.kalman = stationary_kalman(plant);
  c.input_delay = 0;
  c.plant_states = plant.states();
  const double cost = observer_predicted_cost(plant, c.F, c.kalman, reg.X);
  return {"cen_delayfree", std::move(c), cost};
}

ControllerRealization centralized_delayed_lqg(const StateSpaceModel& plant, int d) {
  if (d < 0) fail(ErrorCode::kInvalidArgument, "delay must be nonnegative");
  if (d == 0) {
    ControllerRealization c = lqg_delay_free(plant);
    c.architecture = "cen_d0";
    return c;
  }
  plant.validate_for_synthesis();
  if (!plant.is_discrete()) fail(ErrorCode::kDomainMismatch, "synthesis needs a discretized plant");
  if ((plant.B1 * plant.D21.transpose()).norm() > 1e-12 * (1.0 + plant.B1.norm() * plant.D21.norm())) {
    fail(ErrorCode::kUnsupportedRepresentation,
         "delayed synthesis needs uncorrelated process and measurement noise");
  }
  const StateSpaceModel aug = measurement_delay_augmentation(plant, d);
  const AreSolution reg = solve_dare({aug.A, aug.B2, aug.C1, aug.D12});
  ObserverController c;
  c.A = aug.A;
  c.B2 = aug.B2;
  c.C2 = aug.C2;
  c.F = reg.F;
  c.kalman = stationary_kalman(aug);
  c.input_delay = d;
  c.plant_states = plant.states();
  const double cost = observer_predicted_cost(aug, c.F, c.kalman, reg.X);
  return {"cen_d" + std::to_string(d), std::move(c), cost};
}

ControllerRealization decentralized_delayed_lqg(const PartitionedPlant& plant, int d1, int d2) {
  require_discrete_partitioned(plant);
  validate_discrete(d1, d2);
  const TailDesign tail = centralized_tail(plant.realization);
  return stationary_law(plant, d1, d2, d2, tail, blockdiag_tail(plant).F,
                        "dec_" + std::to_string(d1) + "_" + std::to_string(d2));
}

ControllerRealization decentralized_delayed_lqg(const PartitionedPlant& plant, const DelaySpec& spec) {
  if (!spec.discrete) fail(ErrorCode::kInvalidArgument, "delay spec has not been discretized");
  const auto& h = plant.realization.sample_period;
  if (!h || std::abs(*h - spec.discrete->h) > 1e-12 * *h) {
    fail(ErrorCode::kDomainMismatch, "delay spec and plant use different sample periods");
  }
  return decentralized_delayed_lqg(plant, spec.discrete->d1, spec.discrete->d2);
}

ControllerRealization blockdiag_lqg(const PartitionedPlant& plant, int d1) {
  require_discrete_partitioned(plant);
  if (d1 < 0) fail(ErrorCode::kInvalidArgument, "delay must be nonnegative");
  const TailDesign tail = blockdiag_tail(plant);
  return stationary_law(plant, d1, std::nullopt, d1, tail, tail.F, "blockdiag_" + std::to_string(d1));
}

StructuredSynthesisResult structured_fir_youla(const PartitionedPlant& plant, int d1,
                                               std::optional<int> cross_delay, int fir_length,
                                               std::optional<FirTail> tail_kind) {
  require_discrete_partitioned(plant);
  validate_discrete(d1, cross_delay.value_or(d1));
  const FirTail kind = tail_kind.value_or(cross_delay ? FirTail::kCentralized : FirTail::kBlockDiagonal);
  if (kind == FirTail::kCentralized && !cross_delay) {
    fail(ErrorCode::kInvalidArgument, "a centralized tail needs the cross stream");
  }
  const int needed = cross_delay.value_or(d1) + 1;
  if (fir_length < needed) {
    std::ostringstream os;
    os << "FIR length " << fir_length << " is shorter than the largest delay + 1 (" << needed << ")";
    fail(ErrorCode::kInvalidArgument, os.str());
  }
  const auto& r = plant.realization;
  const Eigen::Index n = r.states();
  const Eigen::Index m = r.control_inputs();
  const Eigen::Index p = r.measurements();
  const Eigen::Index nz = r.regulated_outputs();
  const KalmanGains k = stationary_kalman(plant);
  const TailDesign bd = blockdiag_tail(plant);
  const TailDesign tail = kind == FirTail::kCentralized ? centralized_tail(r) : bd;
  const Matrix x_half = psd_factor(tail.X);
  const int len = fir_length;

  StructuredSynthesisResult out;
  out.fir_length = len;
  out.taps.assign(static_cast<std::size_t>(len), Matrix::Zero(m, p));
  std::vector<Matrix> responses(static_cast<std::size_t>(len), Matrix::Zero(n, p));
  Matrix entry = Matrix::Zero(n, p);
  double objective = estimation_floor(r, k);

  // Powers A^j and the impulse blocks A^j B used to express every predicted
  // state as an affine function of the stacked taps.
  std::vector<Matrix> a_pow(static_cast<std::size_t>(len + 1));
  a_pow[0] = Matrix::Identity(n, n);
  for (int j = 1; j <= len; ++j) a_pow[static_cast<std::size_t>(j)] = r.A * a_pow[static_cast<std::size_t>(j - 1)];

  for (Eigen::Index i = 0; i < plant.subsystems(); ++i) {
    const BlockRange y = detail::measurement_range(plant.blocks, i);
    const Matrix w = innovation_factor(k.V.block(y.offset, y.offset, y.size, y.size));
    const Matrix s0 = k.M.middleCols(y.offset, y.size) * w;
    const Matrix c0 = (k.L.middleCols(y.offset, y.size) - r.A * k.M.middleCols(y.offset, y.size)) * w;

    // Decision variables: (age, input channel) pairs allowed by the pattern.
    std::vector<std::pair<int, Eigen::Index>> vars;
    for (int a = 0; a < len; ++a) {
      for (Eigen::Index g = 0; g < plant.subsystems(); ++g) {
        if (!tap_allowed(a, g, i, d1, cross_delay)) continue;
        const auto& u = plant.blocks[static_cast<std::size_t>(g)].inputs;
        for (Eigen::Index c = 0; c < u.size; ++c) vars.emplace_back(a, u.offset + c);
      }
    }
    const Eigen::Index nv = static_cast<Eigen::Index>(vars.size());
    const Eigen::Index rows = len * nz + n;

    for (Eigen::Index col = 0; col < y.size; ++col) {
      // Free response (all taps zero) and the sensitivity to each variable.
      Vector z0(rows);
      Matrix phi = Matrix::Zero(rows, nv);
      Vector s = s0.col(col);
      for (int a = 0; a < len; ++a) {
        z0.segment(a * nz, nz) = r.C1 * s;
        s = r.A * s;
        if (a == 0) s += c0.col(col);
      }
      z0.tail(n) = x_half * s;
      for (Eigen::Index v = 0; v < nv; ++v) {
        const auto [age, ch] = vars[static_cast<std::size_t>(v)];
        phi.block(age * nz, v, nz, 1) = r.D12.col(ch);
        for (int a = age + 1; a < len; ++a) {
          phi.block(a * nz, v, nz, 1) = r.C1 * a_pow[static_cast<std::size_t>(a - age - 1)] * r.B2.col(ch);
        }
        phi.block(len * nz, v, n, 1) = x_half * a_pow[static_cast<std::size_t>(len - age - 1)] * r.B2.col(ch);
      }
      const Vector g = nv > 0 ? Vector(phi.colPivHouseholderQr().solve(-z0)) : Vector(0);
      objective += (z0 + phi * g).squaredNorm();

      Matrix u = Matrix::Zero(m, len);
      for (Eigen::Index v = 0; v < nv; ++v) {
        const auto [age, ch] = vars[static_cast<std::size_t>(v)];
        u(ch, age) = g(v);
      }
      Vector sn = s0.col(col);
      for (int a = 0; a < len; ++a) {
        responses[static_cast<std::size_t>(a)].col(y.offset + col) = sn;
        sn = r.A * sn + r.B2 * u.col(a);
        if (a == 0) sn += c0.col(col);
      }
      // Whitened column: store U (taps on ε) and s(N); un-whiten below.
      for (int a = 0; a < len; ++a) out.taps[static_cast<std::size_t>(a)].col(y.offset + col) = u.col(a);
      entry.col(y.offset + col) = sn;
    }
    // G = U W⁻¹ on this source's columns.
    const Matrix w_inv = w.triangularView<Eigen::Lower>().solve(Matrix::Identity(y.size, y.size));
    for (auto& t : out.taps) t.middleCols(y.offset, y.size) = t.middleCols(y.offset, y.size) * w_inv;
    for (auto& t : responses) t.middleCols(y.offset, y.size) = t.middleCols(y.offset, y.size) * w_inv;
    entry.middleCols(y.offset, y.size) = entry.middleCols(y.offset, y.size) * w_inv;
  }
  out.objective = objective;

  InnovationLaw law;
  law.d1 = d1;
  law.d2 = cross_delay.value_or(d1);
  law.entry_age = len;
  law.communicating = cross_delay.has_value();
  law.A = r.A;
  law.B = r.B2;
  law.C = r.C2;
  law.blocks = plant.blocks;
  law.filter_gain = {k.L};
  law.filter_update = {k.M};
  law.tail_gain = {tail.F};
  law.taps = {out.taps};
  law.responses = {std::move(responses)};
  law.entry = {entry};
  law.entry_next = {Matrix::Zero(n, p)};
  law.stabilizer = bd.F;
  law.validate();
  out.controller = {"fir_" + std::to_string(len), std::move(law), objective};
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json kalman_to_json(const KalmanGains& k) {
  return {{"P", matrix_to_json(k.P)}, {"L", matrix_to_json(k.L)}, {"M", matrix_to_json(k.M)},
          {"V", matrix_to_json(k.V)}};
}

KalmanGains kalman_from_json(const nlohmann::json& j) {
  return {matrix_from_json(j.at("P")), matrix_from_json(j.at("L")), matrix_from_json(j.at("M")),
          matrix_from_json(j.at("V"))};
}

nlohmann::json matrices_to_json(const std::vector<Matrix>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& m : v) a.push_back(matrix_to_json(m));
  return a;
}

std::vector<Matrix> matrices_from_json(const nlohmann::json& j, Eigen::Index cols_if_empty) {
  std::vector<Matrix> v;
  for (const auto& e : j) v.push_back(matrix_from_json(e, cols_if_empty));
  return v;
}

nlohmann::json range_to_json(const BlockRange& r) { return {r.offset, r.size}; }
BlockRange range_from_json(const nlohmann::json& j) { return {j.at(0).get<Eigen::Index>(), j.at(1).get<Eigen::Index>()}; }

}  // namespace

nlohmann::json to_json(const ControllerRealization& c) {
  nlohmann::json j;
  j["architecture"] = c.architecture;
  if (std::isfinite(c.predicted_cost)) j["predicted_cost"] = c.predicted_cost;
  if (const auto* o = std::get_if<ObserverController>(&c.body)) {
    j["kind"] = "observer";
    j["A"] = matrix_to_json(o->A);
    j["B2"] = matrix_to_json(o->B2);
    j["C2"] = matrix_to_json(o->C2);
    j["F"] = matrix_to_json(o->F);
    j["kalman"] = kalman_to_json(o->kalman);
    j["input_delay"] = o->input_delay;
    j["plant_states"] = o->plant_states;
  } else {
    const auto& law = std::get<InnovationLaw>(c.body);
    j["kind"] = "agents";
    j["d1"] = law.d1;
    j["d2"] = law.d2;
    j["entry_age"] = law.entry_age;
    j["communicating"] = law.communicating;
    j["A"] = matrix_to_json(law.A);
    j["B"] = matrix_to_json(law.B);
    j["C"] = matrix_to_json(law.C);
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : law.blocks) {
      blocks.push_back({{"states", range_to_json(b.states)},
                        {"noise", range_to_json(b.noise)},
                        {"inputs", range_to_json(b.inputs)},
                        {"measurements", range_to_json(b.measurements)}});
    }
    j["blocks"] = blocks;
    j["filter_gain"] = matrices_to_json(law.filter_gain);
    j["filter_update"] = matrices_to_json(law.filter_update);
    j["tail_gain"] = matrices_to_json(law.tail_gain);
    nlohmann::json taps = nlohmann::json::array();
    for (const auto& row : law.taps) taps.push_back(matrices_to_json(row));
    j["taps"] = taps;
    nlohmann::json responses = nlohmann::json::array();
    for (const auto& row : law.responses) responses.push_back(matrices_to_json(row));
    j["responses"] = responses;
    j["entry"] = matrices_to_json(law.entry);
    j["entry_next"] = matrices_to_json(law.entry_next);
    j["stabilizer"] = matrix_to_json(law.stabilizer);
  }
  return j;
}

ControllerRealization controller_from_json(const nlohmann::json& j) {
  try {
    ControllerRealization c;
    c.architecture = j.at("architecture").get<std::string>();
    if (j.contains("predicted_cost")) c.predicted_cost = j.at("predicted_cost").get<double>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "observer") {
      ObserverController o;
      o.A = matrix_from_json(j.at("A"));
      o.B2 = matrix_from_json(j.at("B2"));
      o.C2 = matrix_from_json(j.at("C2"));
      o.F = matrix_from_json(j.at("F"));
      o.kalman = kalman_from_json(j.at("kalman"));
      o.input_delay = j.at("input_delay").get<int>();
      o.plant_states = j.at("plant_states").get<Eigen::Index>();
      c.body = std::move(o);
    } else if (kind == "agents") {
      InnovationLaw law;
      law.d1 = j.at("d1").get<int>();
      law.d2 = j.at("d2").get<int>();
      law.entry_age = j.at("entry_age").get<int>();
      law.communicating = j.at("communicating").get<bool>();
      law.A = matrix_from_json(j.at("A"));
      law.B = matrix_from_json(j.at("B"));
      law.C = matrix_from_json(j.at("C"));
      for (const auto& b : j.at("blocks")) {
        law.blocks.push_back({range_from_json(b.at("states")), range_from_json(b.at("noise")),
                              range_from_json(b.at("inputs")), range_from_json(b.at("measurements"))});
      }
      const Eigen::Index n = law.A.rows();
      const Eigen::Index p = law.C.rows();
      law.filter_gain = matrices_from_json(j.at("filter_gain"), p);
      law.filter_update = matrices_from_json(j.at("filter_update"), p);
      law.tail_gain = matrices_from_json(j.at("tail_gain"), n);
      for (const auto& row : j.at("taps")) law.taps.push_back(matrices_from_json(row, p));
      for (const auto& row : j.at("responses")) law.responses.push_back(matrices_from_json(row, p));
      law.entry = matrices_from_json(j.at("entry"), p);
      law.entry_next = matrices_from_json(j.at("entry_next"), p);
      law.stabilizer = matrix_from_json(j.at("stabilizer"), n);
      law.validate();
      c.body = std::move(law);
    } else {
      fail(ErrorCode::kConfig, "unknown controller kind '" + kind + "'");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("malformed controller document: ") + e.what());
  }
}

}  // namespace lambda_lqg
