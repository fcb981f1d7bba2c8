#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geonet/analysis.hpp"
#include "geonet/errors.hpp"
#include "test_support.hpp"

namespace geonet {
namespace {

constexpr double kPi = std::numbers::pi;
const ManifoldModel kSphere = ManifoldModel::sphere(2, 1.0);
const ManifoldModel kTorus = ManifoldModel::flat_torus({1.0, 1.0});

OracleConfig oracle(std::size_t M, std::uint64_t seed = 1) {
  OracleConfig c;
  c.M_int = M;
  c.seed = seed;
  return c;
}

ParameterLedger ledger_for(const MaskSpec& mask, double eps1, double c5, RhoRule rule, bool allow) {
  ParameterInputs in;
  in.eps1 = eps1;
  in.c5 = c5;
  in.rho_rule = rule;
  in.allow_rho_above_r1 = allow;
  return derive_parameters(model_bounds(kSphere), mask, NoiseSpec::none(), in);
}

// Unit-speed point at distance s from y along a fixed direction.
Point walk(const ManifoldModel& m, const Point& y, double s, std::uint64_t seed, std::uint64_t i) {
  CounterStream r(seed, StreamTag::kOracle, i, 99);
  Point v(3);
  double dot = 0.0;
  for (auto& c : v) {
    c = r.normal();
  }
  for (std::size_t d = 0; d < 3; ++d) {
    dot += v[d] * y[d];
  }
  double norm = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    v[d] -= dot * y[d];
    norm += v[d] * v[d];
  }
  for (auto& c : v) {
    c *= s / std::sqrt(norm);
  }
  return m.exp_map(y, v);
}

TEST(WitnessCloud, LatticeAndMonteCarlo) {
  EXPECT_TRUE(WitnessCloud(kSphere, DensitySpec::uniform(), oracle(1000)).lattice());
  const WitnessCloud torus(kTorus, DensitySpec::uniform(), oracle(1000));
  EXPECT_TRUE(torus.lattice());
  EXPECT_EQ(torus.size(), 32u * 32u);
  const WitnessCloud tilted(kSphere, DensitySpec::tilt(0.5), oracle(1000));
  EXPECT_FALSE(tilted.lattice());
  EXPECT_EQ(tilted.size(), 1000u);
  auto mc = oracle(500);
  mc.quadrature = false;
  EXPECT_FALSE(WitnessCloud(kSphere, DensitySpec::uniform(), mc).lattice());
  EXPECT_THROW(WitnessCloud(kSphere, DensitySpec::uniform(), oracle(0)), ParameterError);
}

TEST(KPhiOracle, IdenticalPointsUnmasked) {
  const Point y{0, 0.6, 0.8};
  const auto v = kphi_oracle(kSphere, DensitySpec::uniform(), MaskSpec::constant(1.0), y, y, oracle(20000));
  EXPECT_EQ(v.k, 0.0);
  EXPECT_DOUBLE_EQ(v.A, 1.0);
}

TEST(KPhiOracle, AntipodalMatchesPolarQuadrature) {
  const double reference =
      testing::simpson([](double th) { return (2 * th - kPi) * (2 * th - kPi) * std::sin(th) / 2; }, 0.0, kPi);
  const auto v = kphi_oracle(kSphere, DensitySpec::uniform(), MaskSpec::constant(1.0), Point{0, 0, 1},
                             Point{0, 0, -1}, oracle(20000));
  EXPECT_NEAR(v.k, reference, 1e-3 * reference);
  auto mc = oracle(100000, 3);
  mc.quadrature = false;
  const auto m = kphi_oracle(kSphere, DensitySpec::uniform(), MaskSpec::constant(1.0), Point{0, 0, 1},
                             Point{0, 0, -1}, mc);
  EXPECT_NEAR(m.k, reference, 4 * m.k_se);
}

TEST(KPhiOracle, RejectsInvalidPoints) {
  EXPECT_THROW(kphi_oracle(kSphere, DensitySpec::uniform(), MaskSpec::constant(1.0), Point{0, 0, 2},
                           Point{0, 0, 1}, oracle(100)),
               CoordinateError);
}

TEST(KPhiOracle, SandwichBoundsOnRandomPairs) {
  auto cfg = oracle(20000, 2);
  for (const auto& m : {kSphere, kTorus}) {
    for (const auto& mask : {MaskSpec::constant(1.0), MaskSpec::exponential(0.9, 1.0)}) {
      const auto pairs = oracle_pairs(m, DensitySpec::uniform(), mask, 200, 0, cfg);
      for (const auto& p : pairs) {
        EXPECT_LE(p.value.A, 1.0 + 1e-12);
        EXPECT_LE(p.value.k, p.d * p.d * p.value.A + 3 * p.value.k_se + 1e-12);
        EXPECT_LE(std::sqrt(p.value.k), p.d + 3 * std::sqrt(p.value.k_se) + 1e-12);
      }
    }
  }
}

TEST(KPhiOracle, NearPairsReachReliabilityFloor) {
  const auto mask = MaskSpec::exponential(0.9, 1.0);
  const auto g = ledger_for(mask, 0.2, 0.4, RhoRule::kMatchedAccuracy, false);
  const WitnessCloud cloud(kSphere, DensitySpec::uniform(), oracle(20000));
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Point y = sample_one(kSphere, DensitySpec::uniform(), 5, StreamTag::kPairSelection, i);
    const Point z = walk(kSphere, y, g.r1 * (i + 0.5) / 200.0, 5, i);
    const auto v = kphi_oracle(kSphere, mask, cloud, y, z);
    EXPECT_GE(v.A + 3 * v.A_se, g.c4);
  }
}

TEST(EstimateC5, UnmaskedSphereInUnitInterval) {
  const auto e = estimate_c5(kSphere, DensitySpec::uniform(), MaskSpec::constant(1.0), 0.0, oracle(10000), 1000);
  EXPECT_GT(e.c5, 0.0);
  EXPECT_LE(e.c5, 1.0);
  EXPECT_EQ(e.pairs, 1000u);
  EXPECT_GT(e.gated, 990u);
  EXPECT_DOUBLE_EQ(e.c5, 0.9 * e.min_ratio);
}

TEST(EstimateC5, TorusHoldoutStaysAboveEstimate) {
  const auto cfg = oracle(10000, 4);
  const auto mask = MaskSpec::constant(1.0);
  const auto e = estimate_c5(kTorus, DensitySpec::uniform(), mask, 0.0, cfg, 1000, 0);
  const auto fresh = oracle_pairs(kTorus, DensitySpec::uniform(), mask, 10000, 1000, cfg);
  for (const auto& p : fresh) {
    if (p.d > 0.0) {
      EXPECT_GE(p.ratio, e.c5);
    }
  }
}

TEST(EstimateC5, FullyMaskedFails) {
  EXPECT_THROW(estimate_c5(kSphere, DensitySpec::uniform(), MaskSpec::constant(0.0), 1e-6, oracle(2000), 50),
               CalibrationError);
}

TEST(WMinusOracle, ZeroMaskGivesZero) {
  const auto g = ledger_for(MaskSpec::constant(1.0), 0.1, 0.5, RhoRule::kCascade, true);
  auto cfg = oracle(1000);
  cfg.M_outer = 500;
  EXPECT_EQ(w_minus_oracle(kSphere, DensitySpec::uniform(), MaskSpec::constant(0.0), g, Point{0, 0, 1},
                           Point{0, 1, 0}, cfg),
            0.0);
}

TEST(WMinusOracle, NearPairsExceedU0) {
  const auto mask = MaskSpec::exponential(0.9, 1.0);
  const auto g = ledger_for(mask, 0.1, 0.5, RhoRule::kCascade, true);
  auto cfg = oracle(2000);
  cfg.M_outer = 1000;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Point y = sample_one(kSphere, DensitySpec::uniform(), 6, StreamTag::kPairSelection, i);
    CounterStream r(6, StreamTag::kOracle, i);
    const Point z = walk(kSphere, y, g.r1 * r.uniform(), 6, i);
    EXPECT_GE(w_minus_oracle(kSphere, DensitySpec::uniform(), mask, g, y, z, cfg), g.u0) << i;
  }
}

// kappa(s) = k(y, x) for d(y, x) = s on the unmasked unit sphere, by 2-d quadrature.
double kappa(double s) {
  const int nt = 400;
  const int np = 400;
  const double ht = kPi / nt;
  const double hp = 2 * kPi / np;
  double total = 0.0;
  for (int a = 0; a < nt; ++a) {
    const double th = (a + 0.5) * ht;
    for (int b = 0; b < np; ++b) {
      const double ph = (b + 0.5) * hp;
      const double c = std::cos(s) * std::cos(th) + std::sin(s) * std::sin(th) * std::cos(ph);
      const double dx = std::acos(std::clamp(c, -1.0, 1.0));
      total += (th - dx) * (th - dx) * std::sin(th);
    }
  }
  return total * ht * hp / (4 * kPi);
}

TEST(WMinusOracle, UnmaskedMatchesRadialQuadrature) {
  const auto g = ledger_for(MaskSpec::constant(1.0), 0.1, 0.5, RhoRule::kCascade, true);
  const double half2 = g.rho * g.rho / 4;
  const double s_max = 4 * g.rho;
  ASSERT_EQ(psi1(kappa(s_max) / half2), 0.0);
  const double reference =
      testing::simpson([&](double s) { return psi1(kappa(s) / half2) * std::sin(s) / 2; }, 0.0, s_max, 200);
  auto cfg = oracle(20000);
  cfg.M_outer = 8000;
  const Point y{0, 0, 1};
  const double w = w_minus_oracle(kSphere, DensitySpec::uniform(), MaskSpec::constant(1.0), g, y, y, cfg);
  EXPECT_NEAR(w, reference, 0.05 * reference);
}

TEST(IsDeltaNet, SingleSampleOnSphere) {
  DenseTable<double> one(1, 3, 0.0);
  one(0, 2) = 1.0;
  const auto r = is_delta_net(one, kSphere, 0.1, oracle(1000));
  EXPECT_FALSE(r.verdict);
  EXPECT_GT(r.gap, 3.0);
  EXPECT_LE(r.gap, kPi + 1e-12);
}

TEST(IsDeltaNet, FineTorusGrid) {
  const double delta = 0.1;
  const std::size_t m = static_cast<std::size_t>(std::ceil(3.0 / delta));
  DenseTable<double> grid(m * m, 2);
  for (std::size_t i = 0; i < m * m; ++i) {
    grid(i, 0) = static_cast<double>(i % m) / m;
    grid(i, 1) = static_cast<double>(i / m) / m;
  }
  auto cfg = oracle(1000);
  cfg.budget = 50000;
  const auto r = is_delta_net(grid, kTorus, delta, cfg);
  EXPECT_TRUE(r.verdict);
  EXPECT_LE(r.gap, std::sqrt(2.0) / 2 / m + 1e-12);
  EXPECT_TRUE(r.reduced_confidence);
  EXPECT_EQ(r.reference_points, 50000u);
}

TEST(IsDeltaNet, DeltaAboveDiameterAlwaysHolds) {
  DenseTable<double> one(1, 2, 0.25);
  EXPECT_TRUE(is_delta_net(one, kTorus, 0.75, oracle(1000)).verdict);
  EXPECT_TRUE(is_delta_net(DenseTable<double>(0, 2), kTorus, 0.75, oracle(1000)).verdict);
}

TEST(IsDeltaNet, ThreadCountDoesNotChangeGap) {
  const auto s = sample_points(kSphere, 300, DensitySpec::uniform(), 3);
  auto cfg = oracle(1000);
  cfg.budget = 20000;
  const auto a = is_delta_net(s.points(), kSphere, 0.2, cfg);
  cfg.threads = 4;
  EXPECT_EQ(is_delta_net(s.points(), kSphere, 0.2, cfg).gap, a.gap);
}

TEST(ErrorReport, ExactApproximationHasNoViolations) {
  const auto s = sample_points(kSphere, 40, DensitySpec::uniform(), 3);
  const auto t = truth_table(s, 0, 40);
  const auto r = error_report(t, t, {0.5, 0.01, 0.4, 0.0});
  EXPECT_EQ(r.pairs, 40u * 39u / 2u);
  EXPECT_EQ(r.near_pairs + r.far_pairs, r.pairs);
  EXPECT_EQ(r.near_violations, 0u);
  EXPECT_EQ(r.far_violations, 0u);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.near_quantiles.back(), 0.0);
}

TEST(ErrorReport, ConstantDiameterFailsEveryNearPair) {
  DenseTable<double> truth(5, 5, 0.1);
  DenseTable<double> approx(5, 5, kPi);
  for (std::size_t i = 0; i < 5; ++i) {
    truth(i, i) = approx(i, i) = 0.0;
  }
  const auto r = error_report(approx, truth, {0.25, 0.2, 0.05, 0.01});
  EXPECT_EQ(r.near_pairs, 10u);
  EXPECT_DOUBLE_EQ(r.near_rate, 1.0);
  EXPECT_FALSE(r.pass);
}

TEST(ErrorReport, QuantilesIncludeMaskAndJson) {
  DenseTable<double> truth(4, 4, 0.0);
  DenseTable<double> approx(4, 4, 0.0);
  DenseTable<std::uint8_t> include(4, 4, 1);
  const double errs[] = {0.01, 0.02, 0.03, 0.04, 0.05, 0.5};
  std::size_t e = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      truth(i, j) = truth(j, i) = 0.1;
      approx(i, j) = approx(j, i) = 0.1 + errs[e++];
    }
  }
  auto r = error_report(approx, truth, {1.0, 0.045, 0.0, 0.2});
  EXPECT_DOUBLE_EQ(r.near_quantiles[0], 0.03);
  EXPECT_DOUBLE_EQ(r.near_quantiles[1], 0.5);
  EXPECT_DOUBLE_EQ(r.near_quantiles[3], 0.5);
  EXPECT_EQ(r.near_violations, 2u);
  EXPECT_FALSE(r.pass);
  include(2, 3) = include(3, 2) = 0;
  r = error_report(approx, truth, {1.0, 0.045, 0.0, 0.2}, &include);
  EXPECT_EQ(r.pairs, 5u);
  EXPECT_EQ(r.near_violations, 1u);
  EXPECT_TRUE(r.pass);
  const auto j = r.to_json();
  EXPECT_EQ(j["near_pairs"], 5);
  EXPECT_EQ(j["pass"], true);
  EXPECT_THROW(error_report(approx, DenseTable<double>(3, 3), {}), InputError);

  testing::TempDir dir("errors");
  write_error_csv(dir / "e.csv", approx, truth, 1.0, &include);
  const std::string text = testing::read_file(dir / "e.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "i,j,truth,approx,error,near");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
}

TEST(TruthTable, MatchesGeodesicDistance) {
  const auto s = sample_points(kTorus, 30, DensitySpec::uniform(), 3);
  const auto t = truth_table(s, 10, 15, 3);
  for (std::size_t i = 0; i < 15; ++i) {
    for (std::size_t j = 0; j < 15; ++j) {
      EXPECT_EQ(t(i, j), i == j ? 0.0 : geodesic_distance(kTorus, s.point(10 + i), s.point(10 + j)));
    }
  }
  EXPECT_THROW(truth_table(s, 20, 15), InputError);
}

TEST(MaterializeRefinedPoint, TorusAffineCombination) {
  DenseTable<double> c(3, 2);
  const double pts[3][2] = {{0.98, 0.5}, {0.02, 0.5}, {0.98, 0.56}};
  for (std::size_t i = 0; i < 3; ++i) {
    c(i, 0) = pts[i][0];
    c(i, 1) = pts[i][1];
  }
  auto coarse = [&](std::size_t i) { return c.row(i); };
  const Point t = materialize_refined_point(kTorus, coarse, RefinedPoint::trivial(0, 2, 2));
  EXPECT_NEAR(t[0], 0.98, 1e-15);
  EXPECT_NEAR(t[1], 0.56, 1e-15);
  const Point y = materialize_refined_point(kTorus, coarse, RefinedPoint{0, {1, 2}, {0.5, 0.25}});
  EXPECT_LT(geodesic_distance(kTorus, y, Point{0.0, 0.515}), 1e-12);
}

TEST(PerturbedDistance, SymmetricSignedAndClamped) {
  int plus = 0;
  for (std::size_t i = 0; i < 2000; ++i) {
    const double a = perturbed_distance(1.0, 1e-3, 9, i, i + 7);
    EXPECT_EQ(a, perturbed_distance(1.0, 1e-3, 9, i + 7, i));
    EXPECT_NEAR(std::abs(a - 1.0), 1e-3, 1e-15);
    plus += a > 1.0 ? 1 : 0;
  }
  EXPECT_GT(plus, 880);
  EXPECT_LT(plus, 1120);
  EXPECT_EQ(perturbed_distance(0.5, 1e-3, 9, 4, 4), 0.0);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_GE(perturbed_distance(0.0, 1e-3, 9, i, i + 1), 0.0);
  }
}

TEST(CalibrateDoubling, ReturnsFirstOfTwoSuccesses) {
  const auto r = calibrate_doubling([](double c) { return c >= 5 ? 1.0 : 0.2; }, 1.0, 0.9);
  EXPECT_DOUBLE_EQ(r.value, 8.0);
  ASSERT_EQ(r.history.size(), 5u);
  EXPECT_DOUBLE_EQ(r.history[4].value, 16.0);
  EXPECT_EQ(r.to_json()["history"].size(), 5u);
}

TEST(CalibrateDoubling, IsolatedSuccessDoesNotCount) {
  int calls = 0;
  const auto r = calibrate_doubling(
      [&](double) {
        ++calls;
        return calls == 1 || calls >= 3 ? 1.0 : 0.0;
      },
      1.0, 0.9);
  EXPECT_DOUBLE_EQ(r.value, 4.0);
}

TEST(CalibrateDoubling, GivesUpAfterMaxSteps) {
  EXPECT_THROW(calibrate_doubling([](double) { return 0.0; }, 1.0, 0.5, 2.0, 6), CalibrationError);
  EXPECT_THROW(calibrate_doubling([](double) { return 1.0; }, 0.0, 0.5), ParameterError);
}

}  // namespace
}  // namespace geonet
