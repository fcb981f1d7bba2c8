#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geonet/table.hpp"

namespace geonet {

struct RefinementScales {
  double delta_hat = 0.0;
  double r_hat = 0.0;
  /// Curvature bound K with r_hat = (delta_hat / K)^{1/3}.
  double K = 0.0;
  int n = 0;
  double eps_prime = 0.0;

  /// delta_hat / r_hat < 1/150. Reported, not enforced.
  bool gate_ok() const noexcept { return delta_hat / r_hat < 1.0 / 150.0; }
  /// Radius of X_p: r_hat / 6 - delta_hat.
  double neighbor_radius() const noexcept { return r_hat / 6.0 - delta_hat; }
  /// Chart pairs (p, q) need d~(p, q) below 2 r_hat / 3 - 2 delta_hat.
  double admissible_radius() const noexcept { return 2.0 * r_hat / 3.0 - 2.0 * delta_hat; }
  nlohmann::json to_json() const;
};

RefinementScales make_scales(double delta_hat, double K, int n);
/// Flat case: r_hat given directly, K = delta_hat / r_hat^3.
RefinementScales make_scales_with_radius(double delta_hat, double r_hat, int n);

struct CascadeScales {
  double eps1 = 0.0;
  double delta1 = 0.0;
  double delta_hat = 0.0;
  double r_hat = 0.0;
};

/// eps1 = delta_hat = delta^{3/2}, delta1 = Lambda^{2/3} delta^{1/2} / 20, r_hat = (delta_hat / Lambda^2)^{1/3}.
/// Throws ParameterError for Lambda = 0; flat models must supply r_hat directly.
CascadeScales scale_cascade(double delta, double Lambda);

/// Coarse net with a symmetric approximate distance d~.
class CoarseNet {
 public:
  using DistanceFn = std::function<double(std::size_t, std::size_t)>;

  explicit CoarseNet(DenseTable<double> table);
  CoarseNet(std::size_t size, DistanceFn fn);

  std::size_t size() const noexcept { return size_; }
  double operator()(std::size_t i, std::size_t j) const { return i == j ? 0.0 : fn_(i, j); }

 private:
  std::size_t size_;
  std::shared_ptr<const DenseTable<double>> table_;
  DistanceFn fn_;
};

/// X_p = { x : d~(p, x) < r_hat / 6 - delta_hat }, in increasing index order.
std::vector<std::size_t> neighbor_set(const CoarseNet& net, const RefinementScales& scales, std::size_t p);
std::vector<std::vector<std::size_t>> neighbor_sets(const CoarseNet& net, const RefinementScales& scales);

/// Uniform barycentric grid {m / M : m_i >= 0, sum m_i <= M}, M = ceil(sqrt(n) / eps').
/// Row-major n-column table. Throws TooFineError if the grid would exceed max_points.
DenseTable<double> simplex_grid(int n, double eps_prime, std::size_t max_points = 5'000'000);
std::size_t simplex_grid_size(int n, double eps_prime);

/// Index (p, alpha, tau) of a refined point. Anchors are a_0 = p and a_i = alpha[i-1];
/// weights are t_0 = 1 - sum(tau) and t_i = tau[i-1].
struct RefinedPoint {
  std::size_t chart = 0;
  std::vector<std::size_t> alpha;
  std::vector<double> tau;

  /// The coarse point x itself, written as (p, (x, ..., x), e_1).
  static RefinedPoint trivial(std::size_t chart, std::size_t x, int n);
  double weight(std::size_t i) const noexcept;
  std::size_t anchor(std::size_t i) const noexcept { return i == 0 ? chart : alpha[i - 1]; }
  std::size_t anchor_count() const noexcept { return alpha.size() + 1; }

  nlohmann::json to_json() const;
  friend bool operator==(const RefinedPoint&, const RefinedPoint&) = default;
};

/// Squared-distance tables of one chart pair (p, q):
/// xx over X_p x X_q, yx over Y_p x X_q, xy over X_p x Y_q, yy over Y_p x Y_q.
struct StagedQ {
  DenseTable<double> xx;
  DenseTable<double> yx;
  DenseTable<double> xy;
  DenseTable<double> yy;
};

/// Throws DomainError when (p, q) is not admissible and InputError when a refined
/// point does not belong to its chart.
StagedQ squared_distance_Q(const CoarseNet& net, const RefinementScales& scales, std::size_t p,
                           std::span<const std::size_t> Xp, std::span<const RefinedPoint> Yp, std::size_t q,
                           std::span<const std::size_t> Xq, std::span<const RefinedPoint> Yq);

/// Squared distances seen from base chart p over a point list Z.
/// Unstaged entries hold NaN; reading one raises StagingError.
class ChartFrame {
 public:
  explicit ChartFrame(std::size_t size);

  std::size_t size() const noexcept { return qp_.size(); }
  void set_base(std::size_t z, double q_pz) { qp_[z] = q_pz; }
  void set(std::size_t a, std::size_t b, double value) {
    q_(a, b) = value;
    q_(b, a) = value;
  }
  double base(std::size_t z) const;
  double Q(std::size_t a, std::size_t b) const;

 private:
  std::vector<double> qp_;
  DenseTable<double> q_;
};

/// Frame over Z = Y_p built from the (p, p) staging; `position_of_p` is the row of p in X_p.
ChartFrame frame_from_self_staging(const StagedQ& pp, std::size_t position_of_p);

/// P(x, y) = (Q(p, x) + Q(p, y) - Q(x, y)) / 2.
double scalar_product_P(const ChartFrame& frame, std::size_t x, std::size_t y);

struct BasisResult {
  std::vector<std::size_t> basis;
  /// max_{i,j} |(r_hat/6)^{-2} P(a_i, a_j) - delta_ij|.
  double residual = 0.0;
};

/// Greedy near-orthonormal basis: candidates need |(r_hat/6)^{-2} P(a, a) - 1| <= tol,
/// then each round adds the candidate with the smallest worst deviation from orthonormality.
/// tol = C1 delta_hat / r_hat. Throws BasisFailure naming `chart`.
BasisResult find_basis(const ChartFrame& frame, std::span<const std::size_t> candidates,
                       const RefinementScales& scales, double C1, std::size_t chart);

/// F(x) = (r_hat/6)^{-1} (P(x, a_1), ..., P(x, a_n)); one row per entry of `points`.
DenseTable<double> chart_map_F(const ChartFrame& frame, std::span<const std::size_t> basis,
                               const RefinementScales& scales, std::span<const std::size_t> points);

/// Refined samples per chart when the full index set is too large: GEONET_BUDGET, or 256.
std::size_t default_refinement_budget();

/// Y_p: every coarse point of X_p as a trivial refined point, followed by the
/// full (alpha, tau) enumeration when it fits in `budget`, or `budget` random draws otherwise.
std::vector<RefinedPoint> chart_points(std::size_t p, std::span<const std::size_t> Xp, const DenseTable<double>& sigma,
                                       std::size_t budget, std::uint64_t seed, bool* subsampled = nullptr);

struct RefineOptions {
  /// Charts to build; empty means every coarse point.
  std::vector<std::size_t> charts;
  std::size_t budget = default_refinement_budget();
  double C1 = 32.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t max_grid = 5'000'000;
  bool dedupe = true;
};

struct ChartDiagnostics {
  std::size_t chart = 0;
  std::size_t neighbors = 0;
  std::size_t generated = 0;
  std::size_t kept = 0;
  std::size_t partners = 0;
  bool subsampled = false;
  double basis_residual = 0.0;
  std::string failure;

  nlohmann::json to_json() const;
};

struct RefinementResult {
  RefinementScales scales;
  /// Global refined index; points of chart i occupy [chart_offsets[i], chart_offsets[i+1]).
  std::vector<RefinedPoint> points;
  std::vector<std::size_t> chart_offsets;
  /// Per refined point: coordinates F in its own chart (NaN when the chart has no basis).
  DenseTable<double> coordinates;
  /// d~' with fallback r_hat; zero diagonal.
  DenseTable<double> dprime;
  /// Number of chart-pair candidates behind each d~' value (0 = fallback).
  DenseTable<std::uint8_t> covered;
  std::vector<ChartDiagnostics> charts;
  std::vector<std::string> warnings;

  nlohmann::json diagnostics_json() const;
};

RefinementResult refine(const CoarseNet& net, const RefinementScales& scales, const RefineOptions& options);

}  // namespace geonet
