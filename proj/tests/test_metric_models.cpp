#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geonet/errors.hpp"
#include "geonet/metric_models.hpp"
#include "test_support.hpp"

namespace geonet {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(GeodesicDistance, SphereAntipodal) {
  const auto s = ManifoldModel::sphere(2, 1.0);
  EXPECT_DOUBLE_EQ(geodesic_distance(s, Point{0, 0, 1}, Point{0, 0, -1}), kPi);
}

TEST(GeodesicDistance, SphereOrthogonal) {
  const auto s = ManifoldModel::sphere(2, 1.0);
  EXPECT_DOUBLE_EQ(geodesic_distance(s, Point{1, 0, 0}, Point{0, 1, 0}), kPi / 2);
}

TEST(GeodesicDistance, TorusFarthestPoint) {
  const auto t = ManifoldModel::flat_torus({1.0, 1.0});
  EXPECT_NEAR(geodesic_distance(t, Point{0, 0}, Point{0.5, 0.5}), 0.7071067812, 1e-10);
}

TEST(GeodesicDistance, SphereScalesWithRadius) {
  const auto s = ManifoldModel::sphere(3, 2.0);
  EXPECT_NEAR(geodesic_distance(s, Point{2, 0, 0, 0}, Point{0, 0, 0, 2}), kPi, 1e-14);
}

TEST(GeodesicDistance, RejectsInvalidCoordinates) {
  const auto s = ManifoldModel::sphere(2, 1.0);
  EXPECT_THROW(geodesic_distance(s, Point{0, 0, 1.1}, Point{0, 0, 1}), CoordinateError);
  EXPECT_THROW(geodesic_distance(s, Point{0, 1}, Point{0, 0, 1}), CoordinateError);
  const auto t = ManifoldModel::flat_torus({1.0, 2.0});
  EXPECT_THROW(geodesic_distance(t, Point{1.0, 0.5}, Point{0, 0}), CoordinateError);
  EXPECT_THROW(geodesic_distance(t, Point{0.5, -0.1}, Point{0, 0}), CoordinateError);
  EXPECT_THROW(geodesic_distance(t, Point{0.5, NAN}, Point{0, 0}), CoordinateError);
  EXPECT_NO_THROW(geodesic_distance(t, Point{0.999, 1.999}, Point{0, 0}));
}

TEST(ModelBounds, UnitSphere) {
  const auto b = model_bounds(ManifoldModel::sphere(2, 1.0));
  EXPECT_EQ(b.n, 2);
  EXPECT_DOUBLE_EQ(b.D, kPi);
  EXPECT_DOUBLE_EQ(b.Lambda, 1.0);
  EXPECT_DOUBLE_EQ(b.i0, kPi);
}

TEST(ModelBounds, UnitTorus) {
  const auto b = model_bounds(ManifoldModel::flat_torus({1.0, 1.0}));
  EXPECT_EQ(b.n, 2);
  EXPECT_DOUBLE_EQ(b.D, std::sqrt(2.0) / 2);
  EXPECT_EQ(b.Lambda, 0.0);
  EXPECT_DOUBLE_EQ(b.i0, 0.5);
}

TEST(ModelBounds, ScaledThreeSphere) {
  const auto b = model_bounds(ManifoldModel::sphere(3, 2.0));
  EXPECT_EQ(b.n, 3);
  EXPECT_DOUBLE_EQ(b.D, 2 * kPi);
  EXPECT_DOUBLE_EQ(b.Lambda, 0.5);
  EXPECT_DOUBLE_EQ(b.i0, 2 * kPi);
}

TEST(ModelBounds, InvariantsHoldAndVolumeBoundDominates) {
  for (const auto& m : {ManifoldModel::sphere(2, 1.0), ManifoldModel::sphere(3, 2.0), ManifoldModel::sphere(4, 0.5),
                        ManifoldModel::flat_torus({1.0, 1.0}), ManifoldModel::flat_torus({0.5, 2.0, 1.0})}) {
    for (const auto& d : {DensitySpec::uniform(), DensitySpec::tilt(0.5)}) {
      const auto b = model_bounds(m, d);
      EXPECT_GT(b.rho_min, 0.0);
      EXPECT_LE(b.rho_min, b.rho_max);
      EXPECT_GT(b.D, 0.0);
      EXPECT_GT(b.i0, 0.0);
      EXPECT_GE(b.Lambda, 0.0);
      EXPECT_GE(b.V0, m.volume());
    }
  }
}

TEST(Volumes, ClosedForms) {
  EXPECT_NEAR(ManifoldModel::sphere(2, 1.0).volume(), 4 * kPi, 1e-12);
  EXPECT_NEAR(ManifoldModel::sphere(3, 1.0).volume(), 2 * kPi * kPi, 1e-12);
  EXPECT_NEAR(ManifoldModel::flat_torus({0.5, 2.0, 3.0}).volume(), 3.0, 1e-12);
  EXPECT_NEAR(unit_ball_volume(2), kPi, 1e-14);
  EXPECT_NEAR(unit_ball_volume(3), 4 * kPi / 3, 1e-14);
  EXPECT_NEAR(hyperbolic_ball_volume(2, 1.0, kPi), 2 * kPi * (std::cosh(kPi) - 1), 1e-9);
  EXPECT_NEAR(hyperbolic_ball_volume(2, 0.0, 2.0), 4 * kPi, 1e-12);
  EXPECT_THROW(hyperbolic_ball_volume(2, -1.0, 1.0), ParameterError);
}

TEST(Volumes, HighDimensionalQuadratureMatchesIndependentIntegral) {
  const int n = 4;
  const double Lambda = 0.7;
  const double r = 1.3;
  const double radial = testing::simpson([&](double t) { return std::pow(std::sinh(Lambda * t) / Lambda, n - 1); },
                                         0.0, r, 10000);
  const double surface = 2 * kPi * kPi;
  EXPECT_NEAR(hyperbolic_ball_volume(n, Lambda, r), surface * radial, 1e-8);
}

TEST(SamplePoints, SingleSphereSampleHasUnitNorm) {
  const auto s = sample_points(ManifoldModel::sphere(2, 1.0), 1, DensitySpec::uniform(), 7);
  ASSERT_EQ(s.size(), 1u);
  const auto p = s.point(0);
  EXPECT_NEAR(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]), 1.0, 1e-12);
}

TEST(SamplePoints, TorusBoxFrequencyMatchesArea) {
  const std::size_t N = 100000;
  const auto s = sample_points(ManifoldModel::flat_torus({1.0, 1.0}), N, DensitySpec::uniform(), 1);
  const double p = 0.3 * 0.45;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto x = s.point(i);
    inside += (x[0] >= 0.2 && x[0] < 0.5 && x[1] >= 0.35 && x[1] < 0.8) ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(inside) / N, p, 3 * std::sqrt(p * (1 - p) / N));
}

TEST(SamplePoints, TiltedHemisphereMassMatchesQuadrature) {
  const std::size_t N = 100000;
  const auto s = sample_points(ManifoldModel::sphere(2, 1.0), N, DensitySpec::tilt(0.5), 1);
  // Density (1 + 0.5 cos(theta)) / (4 pi) in polar angle theta.
  const double mass = testing::simpson([](double th) { return (1 + 0.5 * std::cos(th)) * std::sin(th) / 2; }, 0.0,
                                       kPi / 2);
  std::size_t upper = 0;
  for (std::size_t i = 0; i < N; ++i) {
    upper += s.point(i)[2] > 0 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(upper) / N, mass, 3 * std::sqrt(mass * (1 - mass) / N));
}

TEST(SamplePoints, ReproducibleAndPrefixStable) {
  const auto m = ManifoldModel::sphere(3, 1.5);
  const auto a = sample_points(m, 200, DensitySpec::tilt(0.3), 99);
  const auto b = sample_points(m, 200, DensitySpec::tilt(0.3), 99);
  EXPECT_TRUE(a == b);
  const auto c = sample_points(m, 50, DensitySpec::tilt(0.3), 99);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_TRUE(std::equal(c.point(i).begin(), c.point(i).end(), a.point(i).begin()));
  }
  const auto d = sample_points(m, 200, DensitySpec::tilt(0.3), 100);
  EXPECT_FALSE(a == d);
}

TEST(SamplePoints, RejectsUnnormalizableDensity) {
  EXPECT_THROW(sample_points(ManifoldModel::sphere(2, 1.0), 10, DensitySpec::tilt(1.5), 1), ConfigError);
  EXPECT_THROW(sample_points(ManifoldModel::sphere(2, 1.0), 10, DensitySpec::tilt(-1.0), 1), ConfigError);
}

TEST(SamplePoints, EveryPointIsValid) {
  for (const auto& m : {ManifoldModel::sphere(2, 3.0), ManifoldModel::flat_torus({0.3, 2.0})}) {
    const auto s = sample_points(m, 2000, DensitySpec::tilt(0.8), 5);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_NO_THROW(m.validate_point(s.point(i)));
    }
  }
}

TEST(MetricProperties, SymmetryTriangleAndDiameter) {
  for (const auto& m : {ManifoldModel::sphere(2, 1.0), ManifoldModel::sphere(3, 2.0),
                        ManifoldModel::flat_torus({1.0, 1.0}), ManifoldModel::flat_torus({0.4, 1.0, 2.5})}) {
    const auto s = sample_points(m, 90, DensitySpec::uniform(), 3);
    const double D = m.diameter();
    for (std::size_t i = 0; i + 2 < s.size(); i += 3) {
      const auto p = s.point(i);
      const auto q = s.point(i + 1);
      const auto r = s.point(i + 2);
      const double pq = geodesic_distance(m, p, q);
      EXPECT_EQ(pq, geodesic_distance(m, q, p));
      EXPECT_LE(pq, geodesic_distance(m, p, r) + geodesic_distance(m, r, q) + 1e-9);
      EXPECT_LE(pq, D + 1e-12);
      EXPECT_EQ(geodesic_distance(m, p, p), 0.0);
    }
  }
}

TEST(MetricProperties, SphereDistanceIsRadiusTimesAngle) {
  const auto m = ManifoldModel::sphere(2, 2.5);
  const auto s = sample_points(m, 400, DensitySpec::uniform(), 17);
  for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
    const auto p = s.point(i);
    const auto q = s.point(i + 1);
    const double c = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]) / (2.5 * 2.5);
    EXPECT_NEAR(geodesic_distance(m, p, q), 2.5 * std::acos(std::clamp(c, -1.0, 1.0)), 1e-7);
  }
}

TEST(MetricProperties, TorusDistanceMatchesTranslateBruteForce) {
  const std::vector<double> L{1.0, 0.7};
  const auto m = ManifoldModel::flat_torus(L);
  const auto s = sample_points(m, 2000, DensitySpec::uniform(), 23);
  for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
    const auto p = s.point(i);
    const auto q = s.point(i + 1);
    double best = INFINITY;
    for (int a = -2; a <= 2; ++a) {
      for (int b = -2; b <= 2; ++b) {
        const double dx = q[0] + a * L[0] - p[0];
        const double dy = q[1] + b * L[1] - p[1];
        best = std::min(best, std::hypot(dx, dy));
      }
    }
    EXPECT_NEAR(geodesic_distance(m, p, q), best, 1e-12);
  }
}

TEST(ExpLog, RoundTripRecoversDistance) {
  for (const auto& m : {ManifoldModel::sphere(2, 1.0), ManifoldModel::flat_torus({1.0, 1.0})}) {
    const auto s = sample_points(m, 100, DensitySpec::uniform(), 8);
    for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
      const auto p = s.point(i);
      const auto q = s.point(i + 1);
      const double d = m.distance(p, q);
      if (d > 0.9 * m.diameter()) {
        continue;
      }
      const Point v = m.log_map(p, q);
      double norm = 0;
      for (double x : v) {
        norm += x * x;
      }
      EXPECT_NEAR(std::sqrt(norm), d, 1e-9);
      const Point back = m.exp_map(p, v);
      EXPECT_NEAR(m.distance(back, q), 0.0, 1e-7);
    }
  }
}

TEST(SampleIo, RoundTripIsBitExact) {
  testing::TempDir dir("samples");
  const auto s = sample_points(ManifoldModel::flat_torus({1.0, 0.5}), 37, DensitySpec::tilt(0.25), 4);
  save_samples(s, dir / "s.csv");
  const auto back = load_samples(dir / "s.csv");
  EXPECT_TRUE(s == back);
}

TEST(SampleIo, MalformedRowReportsLine) {
  testing::TempDir dir("samples_bad");
  const auto s = sample_points(ManifoldModel::sphere(2, 1.0), 3, DensitySpec::uniform(), 4);
  save_samples(s, dir / "s.csv");
  std::string text = testing::read_file(dir / "s.csv");
  text += "3,0.5\n";
  std::ofstream(dir / "s.csv") << text;
  try {
    load_samples(dir / "s.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5u);
  }
}

TEST(ModelJson, RoundTrip) {
  for (const auto& m : {ManifoldModel::sphere(3, 2.0), ManifoldModel::flat_torus({1.0, 0.25})}) {
    EXPECT_EQ(ManifoldModel::from_json(m.to_json()), m);
  }
  EXPECT_EQ(DensitySpec::from_json(DensitySpec::tilt(0.4).to_json()), DensitySpec::tilt(0.4));
  EXPECT_THROW(ManifoldModel::sphere(2, -1.0), ConfigError);
  EXPECT_THROW(ManifoldModel::flat_torus({}), ConfigError);
}

}  // namespace
}  // namespace geonet
