#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "lambda_lqg/controllers.hpp"
#include "lambda_lqg/errors.hpp"
#include "lambda_lqg/simulator.hpp"
#include "lambda_lqg/synthesis.hpp"

namespace lambda_lqg {
namespace {

using testing::coupled_scalar_plant;
using testing::default_plant;

// x⁺ = x + w + u, y = x + v, z = [x; u].
StateSpaceModel golden_plant() {
  return StateSpaceModel(Matrix::Ones(1, 1), (Matrix(1, 2) << 1, 0).finished(), Matrix::Ones(1, 1),
                         (Matrix(2, 1) << 1, 0).finished(), Matrix::Ones(1, 1),
                         (Matrix(2, 1) << 0, 1).finished(), (Matrix(1, 2) << 0, 1).finished(), 1.0);
}

const ObserverController& observer(const ControllerRealization& c) {
  return std::get<ObserverController>(c.body);
}

TEST(Synthesis, GoldenRatioPlant) {
  const ControllerRealization c = lqg_delay_free(golden_plant());
  EXPECT_NEAR(observer(c).F(0, 0), -0.6180339887498949, 1e-10);
  EXPECT_NEAR(exact_h2_cost(golden_plant(), c), c.predicted_cost, 1e-10);
}

TEST(Synthesis, SelfDualPlantHasDualGains) {
  // A symmetric, B2 = C2ᵀ, B1 = C1ᵀ, D21 = D12ᵀ: the filter problem is the
  // regulator problem transposed.
  const StateSpaceModel p(Matrix::Constant(1, 1, 1.3), (Matrix(1, 2) << 1, 0).finished(),
                          Matrix::Ones(1, 1), (Matrix(2, 1) << 1, 0).finished(), Matrix::Ones(1, 1),
                          (Matrix(2, 1) << 0, 1).finished(), (Matrix(1, 2) << 0, 1).finished(), 1.0);
  const ControllerRealization r = lqg_delay_free(p);
  const ObserverController& c = observer(r);
  EXPECT_NEAR(c.kalman.L(0, 0), -c.F(0, 0), 1e-12);
}

TEST(Synthesis, ZeroCostGivesZeroController) {
  StateSpaceModel p = golden_plant();
  p.A(0, 0) = 0.5;
  p.C1.setZero();
  const ControllerRealization c = lqg_delay_free(p);
  EXPECT_EQ(observer(c).F.norm(), 0.0);
  EXPECT_NEAR(exact_h2_cost(p, c), 0.0, 1e-15);
  EXPECT_NEAR(exact_h2_cost(p, centralized_delayed_lqg(p, 2)), 0.0, 1e-15);
}

TEST(Synthesis, DelayZeroIsDelayFree) {
  const StateSpaceModel& p = default_plant().realization;
  const ControllerRealization ca = lqg_delay_free(p), cb = centralized_delayed_lqg(p, 0);
  const ObserverController& a = observer(ca);
  const ObserverController& b = observer(cb);
  EXPECT_EQ(a.F, b.F);
  EXPECT_EQ(a.kalman.L, b.kalman.L);
  EXPECT_EQ(a.kalman.M, b.kalman.M);
}

TEST(Synthesis, DelayCostsAreIncreasing) {
  const StateSpaceModel g = golden_plant();
  double previous = exact_h2_cost(g, lqg_delay_free(g));
  for (int d = 1; d <= 4; ++d) {
    const ControllerRealization c = centralized_delayed_lqg(g, d);
    const double j = exact_h2_cost(g, c);
    EXPECT_GT(j, previous);
    EXPECT_NEAR(j, c.predicted_cost, 1e-9 * j);
    previous = j;
  }
}

TEST(Synthesis, LqgBeatsRandomStabilizingControllers) {
  const StateSpaceModel g = golden_plant();
  const double best = exact_h2_cost(g, lqg_delay_free(g));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  int tried = 0;
  while (tried < 20) {
    LinearController k;
    k.A = Matrix::Constant(1, 1, u(rng) * 0.6);
    k.B = Matrix::Constant(1, 1, u(rng));
    k.C = Matrix::Constant(1, 1, u(rng));
    k.D = Matrix::Constant(1, 1, u(rng));
    if (!is_schur_stable(close_loop(g, k).A)) continue;
    EXPECT_GE(exact_h2_cost(g, k), best);
    ++tried;
  }
}

TEST(Synthesis, DecentralizedCollapsesWithoutDelay) {
  const PartitionedPlant& p = default_plant();
  const double cen = exact_h2_cost(p.realization, lqg_delay_free(p.realization));
  const double dec = exact_h2_cost(p.realization, decentralized_delayed_lqg(p, 0, 0));
  EXPECT_NEAR(dec, cen, 1e-9 * cen);
}

TEST(Synthesis, EqualDelaysAreCentralized) {
  const PartitionedPlant p = coupled_scalar_plant();
  for (int k = 1; k <= 3; ++k) {
    const double cen = exact_h2_cost(p.realization, centralized_delayed_lqg(p.realization, k));
    const ControllerRealization dec = decentralized_delayed_lqg(p, k, k);
    EXPECT_NEAR(exact_h2_cost(p.realization, dec), cen, 1e-9 * cen) << "k = " << k;
    EXPECT_NEAR(dec.predicted_cost, cen, 1e-9 * cen);
  }
}

TEST(Synthesis, CrossDelayOrdersCosts) {
  const PartitionedPlant p = coupled_scalar_plant();
  const auto& r = p.realization;
  const double cen = exact_h2_cost(r, centralized_delayed_lqg(r, 1));
  const double bd = exact_h2_cost(r, blockdiag_lqg(p, 1));
  double previous = cen;
  for (int d2 = 2; d2 <= 6; ++d2) {
    const double dec = exact_h2_cost(r, decentralized_delayed_lqg(p, 1, d2));
    EXPECT_GT(dec, previous) << "d2 = " << d2;
    EXPECT_LT(dec, bd) << "d2 = " << d2;
    previous = dec;
  }
}

TEST(Synthesis, DecentralizedIsStrictlyBetweenOnDefaultPlant) {
  const PartitionedPlant& p = default_plant();
  const auto& r = p.realization;
  const double cen = exact_h2_cost(r, centralized_delayed_lqg(r, 1));
  const double dec = exact_h2_cost(r, decentralized_delayed_lqg(p, 1, 2));
  const double bd = exact_h2_cost(r, blockdiag_lqg(p, 1));
  EXPECT_LT(cen, dec);
  EXPECT_LT(dec, bd);
}

TEST(Synthesis, PredictedCostIsExact) {
  const PartitionedPlant p = coupled_scalar_plant();
  for (auto [d1, d2] : std::vector<std::pair<int, int>>{{0, 0}, {0, 2}, {1, 2}, {2, 3}, {1, 5}}) {
    const ControllerRealization c = decentralized_delayed_lqg(p, d1, d2);
    EXPECT_NEAR(exact_h2_cost(p.realization, c), c.predicted_cost, 1e-10 * c.predicted_cost);
  }
  const ControllerRealization b = blockdiag_lqg(p, 2);
  EXPECT_NEAR(exact_h2_cost(p.realization, b), b.predicted_cost, 1e-10 * b.predicted_cost);
}

// Markov parameter h[k](i, j) must vanish when the input i and measurement j
// belong to agents whose delay exceeds k.
void expect_structure(const PartitionedPlant& p, const LinearController& k, int d1, std::optional<int> d2,
                      int count) {
  const auto h = k.markov_parameters(count);
  for (int lag = 0; lag < count; ++lag) {
    for (Eigen::Index a = 0; a < p.subsystems(); ++a) {
      for (Eigen::Index b = 0; b < p.subsystems(); ++b) {
        if (tap_allowed(lag, a, b, d1, d2)) continue;
        const auto& ia = p.blocks[a].inputs;
        const auto& jb = p.blocks[b].measurements;
        EXPECT_LE(h[lag].block(ia.offset, jb.offset, ia.size, jb.size).cwiseAbs().maxCoeff(), 1e-12)
            << "lag " << lag << " input agent " << a << " source " << b;
      }
    }
  }
}

TEST(Synthesis, RealizedControllerRespectsInformationPattern) {
  const PartitionedPlant& p = default_plant();
  expect_structure(p, realize(decentralized_delayed_lqg(p, 2, 3)), 2, 3, 12);
  expect_structure(p, realize(blockdiag_lqg(p, 2)), 2, std::nullopt, 40);
  const PartitionedPlant s = coupled_scalar_plant();
  expect_structure(s, realize(decentralized_delayed_lqg(s, 1, 4)), 1, 4, 10);
  // The cross taps are genuinely used once allowed.
  const auto h = realize(decentralized_delayed_lqg(s, 1, 4)).markov_parameters(6);
  EXPECT_GT(std::abs(h[4](0, 1)), 1e-6);
}

TEST(Synthesis, TapPerturbationsDoNotHelp) {
  // The decentralized law is optimal among controllers with its pattern, so
  // moving any allowed tap can only raise the cost.
  const PartitionedPlant p = coupled_scalar_plant();
  const ControllerRealization c = decentralized_delayed_lqg(p, 1, 3);
  const double j = exact_h2_cost(p.realization, c);
  const InnovationLaw& law = std::get<InnovationLaw>(c.body);
  for (int k = 0; k < 3; ++k) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      for (Eigen::Index src = 0; src < 2; ++src) {
        if (!tap_allowed(k, i, src, 1, 3)) continue;
        for (double delta : {-0.05, 0.05}) {
          InnovationLaw moved = law;
          moved.taps[0][static_cast<std::size_t>(k)](i, src) += delta;
          ControllerRealization m = c;
          m.body = moved;
          const double jm = exact_h2_cost(p.realization, m);
          EXPECT_GE(jm, j * (1 - 1e-12)) << "tap " << k << " (" << i << ", " << src << ")";
          expect_structure(p, realize(m), 1, 3, 8);
        }
      }
    }
  }
}

TEST(Synthesis, AgentViewsSplitTheLaw) {
  const PartitionedPlant& p = default_plant();
  const auto views = agent_views(std::get<InnovationLaw>(decentralized_delayed_lqg(p, 2, 3).body));
  ASSERT_EQ(views.size(), 2u);
  EXPECT_EQ(views[0].filter_gain.rows(), 3);
  EXPECT_EQ(views[1].filter_gain.rows(), 2);
  EXPECT_EQ(views[0].regulator_gain.rows(), 1);
  EXPECT_EQ(views[0].regulator_gain.cols(), 5);
  EXPECT_EQ(views[0].own_taps.size(), 1u);
  EXPECT_EQ(views[0].cross_taps.size(), 0u);
  EXPECT_EQ(views[0].own_delay, 2);
  EXPECT_EQ(views[0].message_delay, 1);
}

TEST(Synthesis, StructuredFirMatchesRecursion) {
  const PartitionedPlant p = coupled_scalar_plant();
  const double dec = exact_h2_cost(p.realization, decentralized_delayed_lqg(p, 1, 3));
  const StructuredSynthesisResult fir = structured_fir_youla(p, 1, 3, 20);
  EXPECT_NEAR(fir.objective, dec, 1e-8 * dec);
  EXPECT_NEAR(exact_h2_cost(p.realization, fir.controller), fir.objective, 1e-8 * dec);
  for (int k = 0; k < 20; ++k) {
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index src = 0; src < 2; ++src)
        if (!tap_allowed(k, i, src, 1, 3)) EXPECT_EQ(fir.taps[static_cast<std::size_t>(k)](i, src), 0.0);
  }
}

TEST(Synthesis, StructuredFirNestedLengths) {
  const PartitionedPlant p = coupled_scalar_plant();
  for (std::optional<FirTail> tail : {std::optional<FirTail>{}, std::optional<FirTail>{FirTail::kBlockDiagonal}}) {
    double previous = std::numeric_limits<double>::infinity();
    for (int n : {4, 6, 12, 16}) {
      const double j = structured_fir_youla(p, 1, 3, n, tail).objective;
      EXPECT_LE(j, previous * (1 + 1e-12)) << "N = " << n;
      previous = j;
    }
  }
}

TEST(Synthesis, UnconstrainedFirReachesDelayFree) {
  const PartitionedPlant p = coupled_scalar_plant();
  const double cen = exact_h2_cost(p.realization, lqg_delay_free(p.realization));
  const double j = structured_fir_youla(p, 0, 0, 30, FirTail::kBlockDiagonal).objective;
  EXPECT_NEAR(j, cen, 1e-3 * cen);
}

TEST(Synthesis, FirWithoutCrossTapsApproachesBlockDiagonal) {
  const PartitionedPlant p = coupled_scalar_plant();
  const double bd = exact_h2_cost(p.realization, blockdiag_lqg(p, 1));
  const double j = structured_fir_youla(p, 1, std::nullopt, 40).objective;
  EXPECT_NEAR(j, bd, 1e-6 * bd);
  EXPECT_THROW(structured_fir_youla(p, 1, std::nullopt, 40, FirTail::kCentralized), Error);
  EXPECT_THROW(structured_fir_youla(p, 1, 3, 3), Error);
}

TEST(Synthesis, ControllerJsonRoundTrip) {
  const PartitionedPlant p = coupled_scalar_plant();
  for (const ControllerRealization& c :
       {decentralized_delayed_lqg(p, 1, 2), centralized_delayed_lqg(p.realization, 2)}) {
    const ControllerRealization back = controller_from_json(nlohmann::json::parse(to_json(c).dump()));
    EXPECT_EQ(back.architecture, c.architecture);
    EXPECT_EQ(back.predicted_cost, c.predicted_cost);
    const double a = exact_h2_cost(p.realization, c);
    EXPECT_EQ(exact_h2_cost(p.realization, back), a);
  }
}

TEST(Synthesis, RejectsBadInputs) {
  const PartitionedPlant& p = default_plant();
  EXPECT_THROW(decentralized_delayed_lqg(p, 3, 2), Error);
  EXPECT_THROW(centralized_delayed_lqg(p.realization, -1), Error);
  EXPECT_THROW(lqg_delay_free(testing::default_continuous().realization), Error);
  const DelaySpec wrong_h = to_discrete({1e-3, 1.5e-3, std::nullopt}, 0.5e-3);
  EXPECT_THROW(decentralized_delayed_lqg(p, wrong_h), Error);
  const DelaySpec ok = to_discrete({2.0 / 6000, 3.0 / 6000, std::nullopt}, 1.0 / 6000);
  EXPECT_EQ(decentralized_delayed_lqg(p, ok).architecture, "dec_2_3");
}

}  // namespace
}  // namespace lambda_lqg
