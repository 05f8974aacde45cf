#include "lambda_lqg/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <thread>

#include <nlohmann/json.hpp>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

bool BurstPattern::measured(long t) const {
  if (interburst_steps == 0) return true;
  const long period = static_cast<long>(pulses_per_burst) + interburst_steps;
  return ((t % period) + period) % period < pulses_per_burst;
}

void BurstPattern::validate() const {
  if (pulses_per_burst < 1) fail(ErrorCode::kInvalidArgument, "pulses_per_burst must be at least 1");
  if (interburst_steps < 0) fail(ErrorCode::kInvalidArgument, "interburst_steps must be nonnegative");
}

// ---------------------------------------------------------------------------
// Philox4x32-10

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

namespace {

// Uniform on (0, 1) from 64 random bits.
double open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

double gaussian_at(std::uint64_t seed, std::uint64_t step, std::uint32_t channel, std::uint32_t stream) {
  // One Philox block feeds one Box–Muller pair; channels 2k and 2k+1 share it.
  const PhiloxCounter out = philox4x32(
      {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), channel / 2, stream},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const double r = std::sqrt(-2.0 * std::log(open_unit(out[0], out[1])));
  const double theta = 2.0 * std::numbers::pi * open_unit(out[2], out[3]);
  return channel % 2 == 0 ? r * std::cos(theta) : r * std::sin(theta);
}

// ---------------------------------------------------------------------------
// Exact cost

ClosedLoopStatistics closed_loop_statistics(const StateSpaceModel& plant, const LinearController& k) {
  if (!plant.is_discrete()) fail(ErrorCode::kDomainMismatch, "exact cost needs a discrete plant");
  ClosedLoopStatistics s;
  s.loop = close_loop(plant, k);
  s.covariance = solve_lyapunov(s.loop.A, s.loop.B1 * s.loop.B1.transpose(), TimeDomain::kDiscrete);
  s.cost = (s.loop.C1 * s.covariance * s.loop.C1.transpose()).trace() +
           (s.loop.D11 * s.loop.D11.transpose()).trace();
  return s;
}

double exact_h2_cost(const StateSpaceModel& plant, const LinearController& k) {
  return closed_loop_statistics(plant, k).cost;
}

double exact_h2_cost(const StateSpaceModel& plant, const ControllerRealization& c) {
  return exact_h2_cost(plant, realize(c));
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

constexpr std::uint32_t kNoiseStream = 0;
constexpr std::uint32_t kInitialStream = 1;

// Draws the joint initial state from N(0, factorᵀ factor) and splits it
// between plant and controller.
void stationary_start(const Matrix& factor, std::uint64_t seed, Eigen::Index n, Vector& x,
                      RuntimeController& k) {
  Vector g(factor.rows());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g(i) = gaussian_at(seed, 0, static_cast<std::uint32_t>(i), kInitialStream);
  }
  const Vector joint = factor.transpose() * g;
  x = joint.head(n);
  k.set_state(joint.tail(joint.size() - n));
}

// Runs one seeded trajectory, handing each step to `sink(t, x, u, y, z, measured)`.
template <typename Sink>
void run(const StateSpaceModel& p, RuntimeController& k, const SimulationSetup& setup,
         const Matrix* init_factor, Sink&& sink) {
  if (setup.steps < 1) fail(ErrorCode::kInvalidArgument, "steps must be at least 1");
  setup.burst.validate();
  if (k.measurements() != p.measurements() || k.inputs() != p.control_inputs()) {
    fail(ErrorCode::kDimensionMismatch, "controller does not fit the plant");
  }
  k.reset();
  Vector x = Vector::Zero(p.states());
  if (init_factor != nullptr) stationary_start(*init_factor, setup.seed, p.states(), x, k);
  const Eigen::Index q = p.noise_inputs();
  Vector w(q);
  for (long t = 0; t < setup.steps; ++t) {
    for (Eigen::Index j = 0; j < q; ++j) {
      w(j) = gaussian_at(setup.seed, static_cast<std::uint64_t>(t) + 1, static_cast<std::uint32_t>(j),
                         kNoiseStream);
    }
    const bool measured = setup.burst.measured(t);
    const Vector y = p.C2 * x + p.D21 * w;
    const Vector u = k.step(y, measured);
    const Vector z = p.C1 * x + p.D11 * w + p.D12 * u;
    sink(t, x, u, y, z, measured);
    x = p.A * x + p.B1 * w + p.B2 * u;
  }
}

Matrix stationary_factor(const StateSpaceModel& plant, const RuntimeController& k) {
  if (!k.is_linear()) return {};
  return psd_factor(closed_loop_statistics(plant, realize(k)).covariance);
}

}  // namespace

SimulationTrace simulate(const PartitionedPlant& plant, const RuntimeController& controller,
                         const SimulationSetup& setup) {
  const auto& p = plant.realization;
  if (!p.is_discrete()) fail(ErrorCode::kDomainMismatch, "simulation needs a discrete plant");
  auto k = controller.clone();
  Matrix factor;
  if (setup.initial == InitialCondition::kStationary) {
    if (!k->is_linear()) {
      fail(ErrorCode::kUnsupportedRepresentation, "a stationary start needs a linear controller");
    }
    factor = stationary_factor(p, *k);
  }
  SimulationTrace tr;
  tr.seed = setup.seed;
  const auto steps = static_cast<Eigen::Index>(setup.steps);
  tr.x.resize(p.states(), steps);
  tr.u.resize(p.control_inputs(), steps);
  tr.y.resize(p.measurements(), steps);
  tr.wavelength_error.resize(steps);
  tr.cost.resize(steps);
  tr.measured.resize(static_cast<std::size_t>(steps));
  const bool has_row = plant.cost && plant.cost->wavelength_row.size() == p.states();
  run(p, *k, setup, factor.size() > 0 ? &factor : nullptr,
      [&](long t, const Vector& x, const Vector& u, const Vector& y, const Vector& z, bool measured) {
        const auto i = static_cast<Eigen::Index>(t);
        tr.x.col(i) = x;
        tr.u.col(i) = u;
        tr.y.col(i) = y;
        tr.wavelength_error(i) =
            has_row ? plant.cost->wavelength_row.dot(x) : std::numeric_limits<double>::quiet_NaN();
        tr.cost(i) = z.squaredNorm();
        tr.measured[static_cast<std::size_t>(t)] = measured ? 1 : 0;
      });
  return tr;
}

CostReport estimate_cost(const PartitionedPlant& plant, const RuntimeController& controller,
                         const MonteCarloSettings& s, std::string architecture) {
  const auto& p = plant.realization;
  if (!p.is_discrete()) fail(ErrorCode::kDomainMismatch, "simulation needs a discrete plant");
  if (s.n_runs < 2) fail(ErrorCode::kInvalidArgument, "n_runs must be at least 2");
  if (s.steps < 10) fail(ErrorCode::kInvalidArgument, "steps must be at least 10");
  s.burst.validate();

  Matrix factor;
  if (s.initial == InitialCondition::kStationary) factor = stationary_factor(p, controller);
  const long burn = static_cast<long>(std::floor(kBurnInFraction * static_cast<double>(s.steps)));

  std::vector<double> means(static_cast<std::size_t>(s.n_runs), 0.0);
  std::atomic<int> next{0};
  auto worker = [&] {
    auto k = controller.clone();
    for (int r = next++; r < s.n_runs; r = next++) {
      SimulationSetup setup{s.steps, s.base_seed + static_cast<std::uint64_t>(r), s.burst, s.initial};
      double acc = 0.0;
      run(p, *k, setup, factor.size() > 0 ? &factor : nullptr,
          [&](long t, const Vector&, const Vector&, const Vector&, const Vector& z, bool) {
            if (t >= burn) acc += z.squaredNorm();
          });
      means[static_cast<std::size_t>(r)] = acc / static_cast<double>(s.steps - burn);
    }
  };
  const int jobs = std::clamp(s.jobs, 1, s.n_runs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  CostReport rep;
  rep.architecture = std::move(architecture);
  rep.n_runs = s.n_runs;
  rep.steps = s.steps;
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= s.n_runs;
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= s.n_runs - 1;
  rep.mc_mean = mean;
  rep.mc_stderr = std::sqrt(var / s.n_runs);
  rep.run_means = std::move(means);
  return rep;
}

CostReport evaluate(const PartitionedPlant& plant, const ControllerRealization& c,
                    const MonteCarloSettings& settings) {
  const auto k = instantiate(c);
  CostReport rep = estimate_cost(plant, *k, settings, c.architecture);
  rep.exact_h2 = exact_h2_cost(plant.realization, realize(*k));
  if (std::isfinite(c.predicted_cost)) rep.predicted = c.predicted_cost;
  rep.flagged = std::abs(rep.mc_mean - *rep.exact_h2) > 3.0 * rep.mc_stderr;
  return rep;
}

// ---------------------------------------------------------------------------
// Comparison

std::string architecture_name(const std::string& key, int d1, int d2, int fir_length) {
  if (key == "cen_delayfree" || key == "legacy") return key;
  if (key == "cen_d1") return "cen_d" + std::to_string(d1);
  if (key == "dec") return "dec_" + std::to_string(d1) + "_" + std::to_string(d2);
  if (key == "blockdiag_d1") return "blockdiag_" + std::to_string(d1);
  if (key == "fir") {
    return "fir_" + std::to_string(d1) + "_" + std::to_string(d2) + "_N" + std::to_string(fir_length);
  }
  fail(ErrorCode::kInvalidArgument, "unknown architecture '" + key + "'");
}

bool is_architecture_key(const std::string& key) {
  const auto& keys = architecture_keys();
  return key == "fir" || std::find(keys.begin(), keys.end(), key) != keys.end();
}

ControllerRealization synthesize_architecture(const PartitionedPlant& plant, const std::string& key,
                                              const ComparisonSetup& setup) {
  const auto& p = plant.realization;
  const std::string name = architecture_name(key, setup.d1, setup.d2, setup.fir_length);
  if (key == "legacy") fail(ErrorCode::kInvalidArgument, "the legacy baseline is not a linear synthesis");
  ControllerRealization c;
  try {
    if (key == "cen_delayfree") {
      c = lqg_delay_free(p);
    } else if (key == "cen_d1") {
      c = centralized_delayed_lqg(p, setup.d1);
    } else if (key == "dec") {
      c = decentralized_delayed_lqg(plant, setup.d1, setup.d2);
    } else if (key == "blockdiag_d1") {
      c = blockdiag_lqg(plant, setup.d1);
    } else {
      c = structured_fir_youla(plant, setup.d1, setup.d2, setup.fir_length).controller;
    }
  } catch (const Error& e) {
    fail(ErrorCode::kSynthesisFailure, "synthesis of " + name + " failed: " + e.what());
  }
  c.architecture = name;
  return c;
}

std::unique_ptr<RuntimeController> make_architecture(const PartitionedPlant& plant,
                                                     const std::vector<SubsystemModel>& subsystems,
                                                     const std::string& key,
                                                     const ComparisonSetup& setup) {
  if (key == "legacy") {
    return std::make_unique<LegacyRuntime>(
        design_legacy(subsystems, *plant.realization.sample_period, setup.d1, setup.legacy));
  }
  return instantiate(synthesize_architecture(plant, key, setup));
}

namespace {

const CostReport* find(const std::vector<CostReport>& v, const std::string& name) {
  for (const auto& r : v) {
    if (r.architecture == name) return &r;
  }
  return nullptr;
}

double sort_key(const CostReport& r) { return r.exact_h2.value_or(r.mc_mean); }

}  // namespace

ComparisonResult compare_architectures(const PartitionedPlant& plant,
                                       const std::vector<SubsystemModel>& subsystems,
                                       const ComparisonSetup& setup) {
  validate_discrete(setup.d1, setup.d2);
  const auto& p = plant.realization;
  const std::vector<std::string> keys =
      setup.architectures.empty() ? architecture_keys() : setup.architectures;

  ComparisonResult out;
  for (const auto& key : keys) {
    const std::string name = architecture_name(key, setup.d1, setup.d2, setup.fir_length);
    if (key == "legacy") {
      const LegacyDesign design = design_legacy(subsystems, *p.sample_period, setup.d1, setup.legacy);
      CostReport rep;
      if (setup.monte_carlo) {
        MonteCarloSettings mc = setup.mc;
        mc.initial = InitialCondition::kZero;
        rep = estimate_cost(plant, LegacyRuntime(design), mc, name);
      }
      rep.architecture = name;
      out.reports.push_back(std::move(rep));
      continue;
    }
    const ControllerRealization c = synthesize_architecture(plant, key, setup);
    CostReport rep;
    if (setup.monte_carlo) {
      rep = evaluate(plant, c, setup.mc);
    } else {
      rep.architecture = name;
      rep.exact_h2 = exact_h2_cost(p, c);
      if (std::isfinite(c.predicted_cost)) rep.predicted = c.predicted_cost;
    }
    out.reports.push_back(std::move(rep));
  }

  const auto* cen = find(out.reports, architecture_name("cen_d1", setup.d1, setup.d2));
  const auto* dec = find(out.reports, architecture_name("dec", setup.d1, setup.d2));
  const auto* bd = find(out.reports, architecture_name("blockdiag_d1", setup.d1, setup.d2));
  if (cen && dec && bd) {
    const double jc = *cen->exact_h2;
    const double jd = *dec->exact_h2;
    const double jb = *bd->exact_h2;
    const double slack = 1e-10 * jb;
    const bool strict = setup.d2 > setup.d1 && setup.d1 > 0;
    out.ordering_holds = strict ? (jd - jc > slack && jb - jd > slack)
                                : (jc <= jd + slack && jd <= jb + slack);
  }
  const auto* legacy = find(out.reports, "legacy");
  if (setup.monte_carlo && legacy && dec) {
    const double sep = std::hypot(legacy->mc_stderr, dec->mc_stderr);
    out.legacy_dominated = legacy->mc_mean - dec->mc_mean >= 3.0 * sep;
  }
  for (const auto& r : out.reports) {
    if (r.flagged) out.notes.push_back(r.architecture + ": Monte Carlo mean lies more than 3 stderr from the exact cost");
  }
  std::stable_sort(out.reports.begin(), out.reports.end(),
                   [](const CostReport& a, const CostReport& b) { return sort_key(a) < sort_key(b); });
  return out;
}

// ---------------------------------------------------------------------------
// Export

void write_trace_csv(const SimulationTrace& tr, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::kConfig, "cannot write " + path);
  f.precision(17);
  f << "t";
  for (Eigen::Index i = 0; i < tr.x.rows(); ++i) f << ",x" << i;
  for (Eigen::Index i = 0; i < tr.u.rows(); ++i) f << ",u" << i;
  for (Eigen::Index i = 0; i < tr.y.rows(); ++i) f << ",y" << i;
  f << ",e_lambda,cost,burst_mask\n";
  for (Eigen::Index t = 0; t < tr.cost.size(); ++t) {
    f << t;
    for (Eigen::Index i = 0; i < tr.x.rows(); ++i) f << ',' << tr.x(i, t);
    for (Eigen::Index i = 0; i < tr.u.rows(); ++i) f << ',' << tr.u(i, t);
    for (Eigen::Index i = 0; i < tr.y.rows(); ++i) f << ',' << tr.y(i, t);
    f << ',' << tr.wavelength_error(t) << ',' << tr.cost(t) << ','
      << static_cast<int>(tr.measured[static_cast<std::size_t>(t)]) << '\n';
  }
}

nlohmann::json to_json(const CostReport& r) {
  nlohmann::json j;
  j["architecture"] = r.architecture;
  j["exact_h2"] = r.exact_h2 ? nlohmann::json(*r.exact_h2) : nlohmann::json(nullptr);
  if (r.predicted) j["predicted"] = *r.predicted;
  j["mc_mean"] = r.mc_mean;
  j["mc_stderr"] = r.mc_stderr;
  j["n_runs"] = r.n_runs;
  j["steps"] = r.steps;
  j["flagged"] = r.flagged;
  return j;
}

nlohmann::json to_json(const ComparisonResult& r) {
  nlohmann::json j;
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : r.reports) reps.push_back(to_json(rep));
  j["reports"] = reps;
  j["ordering"] = {{"holds", r.ordering_holds ? nlohmann::json(*r.ordering_holds) : nlohmann::json(nullptr)}};
  j["legacy_dominated"] = r.legacy_dominated ? nlohmann::json(*r.legacy_dominated) : nlohmann::json(nullptr);
  j["notes"] = r.notes;
  return j;
}

}  // namespace lambda_lqg
