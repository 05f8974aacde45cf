// Prints one PASS/FAIL line per acceptance criterion and exits non-zero when
// any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>

#include "fixtures.hpp"
#include "lambda_lqg/errors.hpp"
#include "lambda_lqg/finite_horizon.hpp"
#include "lambda_lqg/riccati.hpp"
#include "lambda_lqg/simulator.hpp"
#include "lambda_lqg/synthesis.hpp"

using namespace lambda_lqg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit_s > 0 && s >= time_limit_s) {
    o.pass = false;
    o.detail += " (over time limit)";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %2d %-32s %s  %s [%.2fs]\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const PartitionedPlant& plant() { return testing::default_plant(); }
const StateSpaceModel& real() { return plant().realization; }
double h2(const ControllerRealization& c) { return exact_h2_cost(real(), c); }

AreProblem random_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, bool discrete) {
  AreProblem p;
  p.A = testing::gaussian_matrix(rng, n, n);
  if (discrete) p.A *= 1.2 / std::sqrt(static_cast<double>(n));
  p.B = testing::gaussian_matrix(rng, n, m);
  p.C = testing::gaussian_matrix(rng, n + m, n);
  p.D = testing::gaussian_matrix(rng, n + m, m);
  p.D.bottomRows(m) += Matrix::Identity(m, m) * 2.0;
  return p;
}

Outcome riccati() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int unstable = 0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index n = 1 + i % 8, m = 1 + (i / 8) % 3;
    const AreProblem c = random_problem(rng, n, m, false);
    const AreSolution sc = solve_care(c);
    worst = std::max(worst, sc.residual_norm);
    unstable += !is_hurwitz(c.A + c.B * sc.F);
    const AreProblem d = random_problem(rng, n, m, true);
    const AreSolution sd = solve_dare(d);
    worst = std::max(worst, sd.residual_norm);
    unstable += !is_schur_stable(d.A + d.B * sd.F);
  }
  AreProblem s;
  s.A = s.B = Matrix::Ones(1, 1);
  s.C = (Matrix(2, 1) << 1, 0).finished();
  s.D = (Matrix(2, 1) << 0, 1).finished();
  const double ec = std::abs(solve_care(s).X(0, 0) - (1 + std::sqrt(2.0)));
  const double ed = std::abs(solve_dare(s).X(0, 0) - (1 + std::sqrt(5.0)) / 2);
  return {worst <= 1e-9 && unstable == 0 && ec <= 1e-10 && ed <= 1e-10,
          fmt("200 CARE + 200 DARE: max residual %.1e, unstable %d; scalar errors %.1e / %.1e", worst, unstable,
              ec, ed)};
}

Outcome delay_free_collapse() {
  const double cen = h2(lqg_delay_free(real()));
  const double dec = h2(decentralized_delayed_lqg(plant(), 0, 0));
  const double rel = std::abs(dec - cen) / cen;
  return {rel <= 1e-9, fmt("J_cen %.10e, J_dec(0,0) %.10e, rel %.1e", cen, dec, rel)};
}

Outcome equal_delay_collapse() {
  double worst = 0.0;
  for (int k = 1; k <= 3; ++k) {
    const double cen = h2(centralized_delayed_lqg(real(), k));
    const double dec = h2(decentralized_delayed_lqg(plant(), k, k));
    worst = std::max(worst, std::abs(dec - cen) / cen);
  }
  return {worst <= 1e-9, fmt("k = 1..3, max rel %.1e", worst)};
}

Outcome ordering() {
  ComparisonSetup setup;
  setup.monte_carlo = false;
  setup.architectures = {"cen_delayfree", "cen_d1", "dec", "blockdiag_d1"};
  const ComparisonResult r = compare_architectures(plant(), testing::default_subsystems(), setup);
  auto cost = [&](const std::string& key) {
    const std::string name = architecture_name(key, 2, 3);
    for (const auto& rep : r.reports)
      if (rep.architecture == name) return *rep.exact_h2;
    return std::nan("");
  };
  const double a = cost("cen_delayfree"), b = cost("cen_d1"), c = cost("dec"), d = cost("blockdiag_d1");
  const double margin = std::min({b - a, c - b, d - c});
  return {margin > 1e-10 && r.ordering_holds.value_or(false),
          fmt("%.7e < %.7e < %.7e < %.7e, min margin %.2e", a, b, c, d, margin)};
}

Outcome monotonicity() {
  double previous = 0.0, worst_drop = 0.0;
  for (int d2 = 2; d2 <= 8; ++d2) {
    validate_discrete(2, d2);
    const double j = h2(decentralized_delayed_lqg(plant(), 2, d2));
    if (d2 > 2) worst_drop = std::max(worst_drop, (previous - j) / previous);
    previous = j;
  }
  return {worst_drop <= 1e-9, fmt("d2 = 2..8, largest relative decrease %.1e", worst_drop)};
}

Outcome decentralization_limit() {
  const double bd = h2(blockdiag_lqg(plant(), 2));
  auto gap = [&](int d2) { return std::abs(decentralized_delayed_lqg(plant(), 2, d2).predicted_cost - bd) / bd; };
  const double g = std::abs(h2(decentralized_delayed_lqg(plant(), 2, 20)) - bd) / bd;
  // Smallest d2 reaching 1% (the gap shrinks monotonically).
  int lo = 20, hi = 20;
  while (gap(hi) > 0.01 && hi < 1 << 20) hi *= 2;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (gap(mid) > 0.01 ? lo : hi) = mid;
  }
  return {g <= 0.01, fmt("gap at d2 = 20 is %.2f%%; the gap first falls below 1%% at d2 = %d (%.2f s)", 100 * g, hi,
                         hi / testing::kSampleRate)};
}

Outcome oracle() {
  const PartitionedPlant p = testing::coupled_scalar_plant();
  const Matrix s0 = Matrix::Identity(2, 2);
  const ControllerRealization c = finite_horizon_decentralized(p, 1, 2, 12, s0);
  const double j = finite_horizon_cost(p.realization, *instantiate(c), 12, s0);
  const OraclePolicy o = finite_horizon_oracle(p, 1, 2, 12, s0);
  const double rel = std::abs(j - o.cost) / o.cost;
  return {rel <= 1e-6, fmt("T = 12: controller %.10e, oracle %.10e (%ld variables), rel %.1e", j, o.cost,
                           static_cast<long>(o.variables), rel)};
}

Outcome structured_fir() {
  const double dec = h2(decentralized_delayed_lqg(plant(), 2, 3));
  const StructuredSynthesisResult fir = structured_fir_youla(plant(), 2, 3, 40);
  const double j = h2(fir.controller);
  const double rel = std::abs(j - dec) / dec;
  const double bd_tail = structured_fir_youla(plant(), 2, 3, 40, FirTail::kBlockDiagonal).objective;
  return {rel <= 0.005, fmt("N = 40: %.10e vs dec %.10e, rel %.1e (block-diagonal tail: %+.2f%%)", j, dec, rel,
                            100 * (bd_tail - dec) / dec)};
}

Outcome finite_convergence() {
  auto gap = [](const AreProblem& p) {
    const auto n = p.A.rows();
    const auto steps = riccati_recursion_finite(p, Matrix::Zero(n, n), 500);
    return (steps.front().F - solve_dare(p).F).norm();
  };
  AreProblem golden;
  golden.A = golden.B = Matrix::Ones(1, 1);
  golden.C = (Matrix(2, 1) << 1, 0).finished();
  golden.D = (Matrix(2, 1) << 0, 1).finished();
  const auto& c = testing::coupled_scalar_plant().realization;
  const double e1 = gap(golden);
  const double e2 = gap({c.A, c.B2, c.C1, c.D12});
  // The default plant's regulator has a closed-loop pole within 3e-7 of the
  // unit circle, far too slow for 500 steps; reported for reference.
  const double e3 = gap({real().A, real().B2, real().C1, real().D12});
  return {std::max(e1, e2) <= 1e-8,
          fmt("T = 500: |F_0 - F_dare| = %.1e (scalar), %.1e (coupled scalar); default plant %.1e", e1, e2, e3)};
}

ComparisonResult& full_comparison() {
  static ComparisonResult r = [] {
    ComparisonSetup setup;
    setup.mc.n_runs = 32;
    setup.mc.steps = 20000;
    setup.mc.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return compare_architectures(plant(), testing::default_subsystems(), setup);
  }();
  return r;
}

Outcome mc_consistency() {
  std::string detail;
  bool ok = true;
  for (const auto& rep : full_comparison().reports) {
    if (!rep.exact_h2) continue;
    const double z = std::abs(rep.mc_mean - *rep.exact_h2) / rep.mc_stderr;
    ok = ok && z <= 3.0;
    detail += fmt("%s z=%.2f; ", rep.architecture.c_str(), z);
  }
  return {ok, detail + "32 x 20000"};
}

Outcome structure() {
  const LinearController k = realize(decentralized_delayed_lqg(plant(), 2, 3));
  const auto h = k.markov_parameters(10);
  double worst = 0.0;
  for (int lag = 0; lag < 10; ++lag)
    for (Eigen::Index a = 0; a < 2; ++a)
      for (Eigen::Index b = 0; b < 2; ++b) {
        if (tap_allowed(lag, a, b, 2, 3)) continue;
        const auto& i = plant().blocks[a].inputs;
        const auto& j = plant().blocks[b].measurements;
        worst = std::max(worst, h[lag].block(i.offset, j.offset, i.size, j.size).cwiseAbs().maxCoeff());
      }
  return {worst <= 1e-12, fmt("largest forbidden Markov entry %.1e (%ld controller states)", worst,
                              static_cast<long>(k.states()))};
}

Outcome disturbance() {
  const double eps = 1e-6;
  const PartitionedPlant aug_c = augment_disturbance(testing::default_continuous(), 1000.0, 0, eps);
  const bool pbh = is_stabilizable(aug_c.realization.A, aug_c.realization.B2, TimeDomain::kContinuous) &&
                   is_detectable(aug_c.realization.A, aug_c.realization.C2, TimeDomain::kContinuous);
  const PartitionedPlant aug = discretize_plant(aug_c, 1.0 / testing::kSampleRate);
  const bool pbh_d = is_stabilizable(aug.realization.A, aug.realization.B2, TimeDomain::kDiscrete) &&
                     is_detectable(aug.realization.A, aug.realization.C2, TimeDomain::kDiscrete);
  const double aware = exact_h2_cost(aug.realization, decentralized_delayed_lqg(aug, 2, 3));
  double ignorant = std::numeric_limits<double>::infinity();
  try {
    ignorant = exact_h2_cost(aug.realization, realize(decentralized_delayed_lqg(plant(), 2, 3)));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnstable) throw;
  }
  return {pbh && pbh_d && ignorant - aware > 0.0,
          fmt("1 kHz, eps %.0e: aware %.4e, ignorant %.4e, PBH %s", eps, aware, ignorant,
              pbh && pbh_d ? "ok" : "fails")};
}

Outcome legacy() {
  const auto& r = full_comparison();
  const CostReport *dec = nullptr, *leg = nullptr;
  for (const auto& rep : r.reports) {
    if (rep.architecture == architecture_name("dec", 2, 3)) dec = &rep;
    if (rep.architecture == "legacy") leg = &rep;
  }
  if (!dec || !leg) return {false, "missing report"};
  const double se = std::hypot(dec->mc_stderr, leg->mc_stderr);
  const double sep = (leg->mc_mean - dec->mc_mean) / se;
  return {sep >= 3.0, fmt("legacy %.4e +- %.1e, dec %.4e +- %.1e, separation %.1f stderr", leg->mc_mean,
                          leg->mc_stderr, dec->mc_mean, dec->mc_stderr, sep)};
}

}  // namespace

int main() {
  criterion(1, "riccati correctness", 10, riccati);
  criterion(2, "delay-free collapse", 5, delay_free_collapse);
  criterion(3, "equal-delay collapse", 0, equal_delay_collapse);
  criterion(4, "cost ordering", 30, ordering);
  criterion(5, "delay monotonicity", 0, monotonicity);
  criterion(6, "decentralization limit", 0, decentralization_limit);
  criterion(7, "oracle equivalence", 60, oracle);
  criterion(8, "structured FIR certification", 0, structured_fir);
  criterion(9, "finite-horizon convergence", 0, finite_convergence);
  criterion(10, "MC/exact consistency", 120, mc_consistency);
  criterion(11, "structural compliance", 0, structure);
  criterion(12, "disturbance handling", 0, disturbance);
  criterion(13, "legacy dominance", 0, legacy);
  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
