#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geonet/chart_refine.hpp"
#include "geonet/metric_models.hpp"
#include "geonet/net_estimators.hpp"
#include "geonet/observation.hpp"
#include "geonet/table.hpp"

namespace geonet {

struct OracleConfig {
  /// Integration points per oracle evaluation.
  std::size_t M_int = 20'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Use lattice quadrature when the density is uniform (S^2 and flat tori).
  bool quadrature = true;
  /// Outer integration points of nested oracles.
  std::size_t M_outer = 2'000;
  /// Reference cloud cap of the net check.
  std::size_t budget = 200'000;

  nlohmann::json to_json() const;
};

/// Integration points for integrals against mu, with equal weights.
class WitnessCloud {
 public:
  WitnessCloud(const ManifoldModel& model, const DensitySpec& density, const OracleConfig& cfg);

  std::size_t size() const noexcept { return points_.rows(); }
  PointView point(std::size_t i) const noexcept { return points_.row(i); }
  bool lattice() const noexcept { return lattice_; }

 private:
  DenseTable<double> points_;
  bool lattice_ = false;
};

struct KPhiValue {
  double k = 0.0;
  double A = 0.0;
  double k_se = 0.0;
  double A_se = 0.0;
};

/// k = int |d(y,x) - d(z,x)|^2 Phi(y,x) Phi(x,z) dmu(x) and A = int Phi(y,x) Phi(x,z) dmu(x).
KPhiValue kphi_oracle(const ManifoldModel& model, const MaskSpec& mask, const WitnessCloud& cloud, PointView y,
                      PointView z);
KPhiValue kphi_oracle(const ManifoldModel& model, const DensitySpec& density, const MaskSpec& mask, PointView y,
                      PointView z, const OracleConfig& cfg);

struct OraclePair {
  Point y;
  Point z;
  double d = 0.0;
  KPhiValue value;
  /// sqrt(max(k, 0)) / d.
  double ratio = 0.0;
};

/// `count` random mu-pairs drawn from the pair-selection stream starting at `first`.
std::vector<OraclePair> oracle_pairs(const ManifoldModel& model, const DensitySpec& density, const MaskSpec& mask,
                                     std::size_t count, std::size_t first, const OracleConfig& cfg);

struct C5Estimate {
  double c5 = 0.0;
  double min_ratio = 0.0;
  std::size_t pairs = 0;
  std::size_t gated = 0;

  nlohmann::json to_json() const;
};

/// 0.9 times the minimum of sqrt(k)/d over random pairs with A >= c4_hat.
/// Throws CalibrationError when no pair passes the gate.
C5Estimate estimate_c5(const ManifoldModel& model, const DensitySpec& density, const MaskSpec& mask, double c4_hat,
                       const OracleConfig& cfg, std::size_t pairs = 1000, std::size_t first = 0);
C5Estimate estimate_c5(std::span<const OraclePair> pairs, double c4_hat);

/// int beta1(A(y,x)/b) Phi(z,x) psi_{rho/2}(k(y,x)) dmu(x), with the inner A and k from the oracle.
double w_minus_oracle(const ManifoldModel& model, const DensitySpec& density, const MaskSpec& mask,
                      const ParameterLedger& ledger, PointView y, PointView z, const OracleConfig& cfg);

struct NetCheck {
  bool verdict = false;
  double gap = 0.0;
  std::size_t reference_points = 0;
  bool reduced_confidence = false;

  nlohmann::json to_json() const;
};

/// Largest distance from a uniform reference cloud to the sample set; verdict gap < delta.
NetCheck is_delta_net(const DenseTable<double>& samples, const ManifoldModel& model, double delta,
                      const OracleConfig& cfg);

struct ReportTargets {
  double r1 = 0.0;
  /// Near pairs (d < r1) need |approx - d| <= near_bound.
  double near_bound = 0.0;
  /// Far pairs need approx >= far_floor.
  double far_floor = 0.0;
  /// A run passes when both violation rates are at most this.
  double max_violation_rate = 0.0;
};

struct ErrorReport {
  std::size_t pairs = 0;
  std::size_t near_pairs = 0;
  std::size_t far_pairs = 0;
  std::size_t near_violations = 0;
  std::size_t far_violations = 0;
  double near_rate = 0.0;
  double far_rate = 0.0;
  /// Quantiles 0.5, 0.9, 0.99 and 1 of |approx - d| over near pairs.
  std::vector<double> near_quantiles;
  double far_min = 0.0;
  ReportTargets targets;
  bool pass = false;
  std::optional<NetCheck> net;
  nlohmann::json ledger;

  nlohmann::json to_json() const;
};

/// Compares the upper triangles of two square tables; `include` (optional) selects pairs.
ErrorReport error_report(const DenseTable<double>& approx, const DenseTable<double>& truth,
                         const ReportTargets& targets, const DenseTable<std::uint8_t>* include = nullptr);

/// Writes `i,j,truth,approx,error,near` for every compared pair.
void write_error_csv(const std::filesystem::path& path, const DenseTable<double>& approx,
                     const DenseTable<double>& truth, double r1, const DenseTable<std::uint8_t>* include = nullptr);

/// True distances among samples [begin, begin + count).
DenseTable<double> truth_table(const SampleSet& samples, std::size_t begin, std::size_t count, unsigned threads = 1);

/// exp_p(sum_i t_i log_p(a_i)) for a refined point, with coarse coordinates from `coarse`.
Point materialize_refined_point(const ManifoldModel& model, const std::function<PointView(std::size_t)>& coarse,
                                const RefinedPoint& y);

/// d + delta_hat * s with a fair random sign s drawn once per unordered pair {i, j}; clamped at 0.
double perturbed_distance(double d, double delta_hat, std::uint64_t seed, std::size_t i, std::size_t j);

struct CalibrationStep {
  double value = 0.0;
  double success = 0.0;
};

struct CalibrationResult {
  double value = 0.0;
  std::vector<CalibrationStep> history;

  nlohmann::json to_json() const;
};

/// Multiplies the constant by `factor` until success_rate >= target on two consecutive values;
/// returns the first of the two. Throws CalibrationError after max_steps.
CalibrationResult calibrate_doubling(const std::function<double(double)>& success_rate, double start, double target,
                                     double factor = 2.0, int max_steps = 16);

}  // namespace geonet
