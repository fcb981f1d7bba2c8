#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geonet/rng.hpp"
#include "geonet/table.hpp"

namespace geonet {

using Point = std::vector<double>;
using PointView = std::span<const double>;

enum class ModelKind { kSphere, kFlatTorus };

/// Synthetic manifold with closed-form geodesics.
///
/// Sphere points are stored as vectors of norm R in R^{n+1}; torus points as
/// coordinates in the fundamental box [0, L_1) x ... x [0, L_n).
class ManifoldModel {
 public:
  static ManifoldModel sphere(int n, double radius);
  static ManifoldModel flat_torus(std::vector<double> periods);

  ModelKind kind() const noexcept { return kind_; }
  int dimension() const noexcept { return n_; }
  /// Number of stored coordinates per point.
  std::size_t coordinate_count() const noexcept;
  double radius() const noexcept { return radius_; }
  const std::vector<double>& periods() const noexcept { return periods_; }

  double volume() const;
  double diameter() const;

  /// Throws CoordinateError if p is not a valid point of the model.
  void validate_point(PointView p) const;
  /// Geodesic distance without validating the inputs.
  double distance(PointView p, PointView q) const noexcept;

  /// Inverse exponential map at p, returned in stored-coordinate form
  /// (a tangent vector orthogonal to p for the sphere).
  Point log_map(PointView p, PointView q) const;
  Point exp_map(PointView p, PointView v) const;

  nlohmann::json to_json() const;
  static ManifoldModel from_json(const nlohmann::json& j);

  friend bool operator==(const ManifoldModel&, const ManifoldModel&) = default;

 private:
  ModelKind kind_ = ModelKind::kSphere;
  int n_ = 2;
  double radius_ = 1.0;
  std::vector<double> periods_;
};

/// Exact intrinsic distance; validates both points.
double geodesic_distance(const ManifoldModel& model, PointView p, PointView q);

/// Sampling measure mu, given as a density relative to the Riemannian volume.
///
/// A tilt with amplitude a has relative density 1 + a*g(x), where g is
/// x_last/R on the sphere and cos(2 pi x_1 / L_1) on the torus. Both g have
/// zero mean, so the tilt needs no extra normalization.
struct DensitySpec {
  enum class Kind { kUniform, kTilt };
  Kind kind = Kind::kUniform;
  double amplitude = 0.0;

  static DensitySpec uniform() { return {}; }
  static DensitySpec tilt(double amplitude) { return {Kind::kTilt, amplitude}; }

  void validate() const;
  nlohmann::json to_json() const;
  static DensitySpec from_json(const nlohmann::json& j);

  friend bool operator==(const DensitySpec&, const DensitySpec&) = default;
};

/// d(mu)/d(vol) at p.
double density_at(const ManifoldModel& model, const DensitySpec& density, PointView p);

struct GeometryBounds {
  int n = 0;
  double D = 0.0;
  double Lambda = 0.0;
  double i0 = 0.0;
  double rho_min = 0.0;
  double rho_max = 0.0;
  /// v(n, -Lambda^2, D): volume bound from Bishop-Gromov comparison.
  double V0 = 0.0;

  nlohmann::json to_json() const;
};

GeometryBounds model_bounds(const ManifoldModel& model, const DensitySpec& density = DensitySpec::uniform());

/// Volume of the unit ball in R^n.
double unit_ball_volume(int n);
/// Volume of a ball of radius r in the space form of curvature -Lambda^2.
double hyperbolic_ball_volume(int n, double Lambda, double r);

class SampleSet {
 public:
  SampleSet(ManifoldModel model, DensitySpec density, std::uint64_t seed, DenseTable<double> points);

  std::size_t size() const noexcept { return points_.rows(); }
  PointView point(std::size_t i) const noexcept { return points_.row(i); }
  const DenseTable<double>& points() const noexcept { return points_; }
  const ManifoldModel& model() const noexcept { return model_; }
  const DensitySpec& density() const noexcept { return density_; }
  std::uint64_t seed() const noexcept { return seed_; }

  friend bool operator==(const SampleSet&, const SampleSet&) = default;

 private:
  ManifoldModel model_;
  DensitySpec density_;
  std::uint64_t seed_;
  DenseTable<double> points_;
};

/// Point i depends only on (seed, i), so any prefix of a larger draw is
/// itself a valid draw.
SampleSet sample_points(const ManifoldModel& model, std::size_t N, const DensitySpec& density,
                        std::uint64_t seed);

/// Draws a single point from a dedicated stream.
Point sample_one(const ManifoldModel& model, const DensitySpec& density, std::uint64_t seed,
                 StreamTag stream_tag, std::uint64_t a, std::uint64_t b = 0);

void save_samples(const SampleSet& samples, const std::filesystem::path& path);
SampleSet load_samples(const std::filesystem::path& path);

}  // namespace geonet
