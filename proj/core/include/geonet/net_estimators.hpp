#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geonet/metric_models.hpp"
#include "geonet/observation.hpp"
#include "geonet/table.hpp"

namespace geonet {

/// Contiguous index blocks I0 = [0, N0), I1 = [N0, N0 + N1), I2 = [N0 + N1, N0 + N1 + N2).
struct NetSplit {
  std::size_t N0 = 0;
  std::size_t N1 = 0;
  std::size_t N2 = 0;

  std::size_t begin1() const noexcept { return N0; }
  std::size_t begin2() const noexcept { return N0 + N1; }
  std::size_t total() const noexcept { return N0 + N1 + N2; }

  /// Throws ParameterError unless N2 >= N1 >= N0 >= 1.
  void validate() const;
  /// Additionally checks that every index fits into the observation table.
  void validate_against(const ObservedDistances& obs) const;

  nlohmann::json to_json() const { return {{"N0", N0}, {"N1", N1}, {"N2", N2}}; }
  friend bool operator==(const NetSplit&, const NetSplit&) = default;
};

struct SizeConstants {
  double C3 = 1.0;
  double C10 = 1.0;
  double C15 = 1.0;
};

/// Net sizes from the delta1-net, Hoeffding and tail bounds.
NetSplit sample_sizes(int n, double eps1, double delta1, double theta, const SizeConstants& constants,
                      double diameter = std::numeric_limits<double>::infinity());

/// Smooth even bump: 1 on [-1, 1], 0 outside (-2, 2), quintic smoothstep between.
double psi1(double t) noexcept;
double psi_rho(double t, double rho) noexcept;
double beta1(double t) noexcept;

enum class RhoRule {
  /// rho = 2 eps1 / c5.
  kCascade,
  /// rho = c5 eps1 / 4, which makes 2 rho / c5 + h0 equal eps1.
  kMatchedAccuracy,
};

struct ParameterInputs {
  double eps1 = 0.1;
  double delta1 = 0.1;
  double theta = 0.1;
  double c5 = 0.3;
  RhoRule rho_rule = RhoRule::kCascade;
  /// Accept rho > r1 with a warning instead of an error.
  bool allow_rho_above_r1 = false;
  /// Optional outer scale delta of the refinement cascade (recorded only).
  double delta = 0.0;
};

/// Every derived tuning constant of the estimator, plus the inputs it came from.
struct ParameterLedger {
  int n = 0;
  double D = 0.0;
  double sigma = 0.0;
  double beta = 1.0;
  double r0 = 0.0;
  double r1 = 0.0;
  double phi1 = 0.0;
  double c3_hat = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c4_hat = 0.0;
  double c5 = 0.0;
  double b = 0.0;
  double rho = 0.0;
  double u0 = 0.0;
  double u1 = 0.0;
  double u2 = 0.0;
  double eps1 = 0.0;
  double h0 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  double L = 0.0;
  double eps_L = 0.0;
  double theta = 0.0;
  double delta1 = 0.0;
  double delta = 0.0;
  double eps1_cap = 0.0;
  RhoRule rho_rule = RhoRule::kCascade;
  std::vector<std::string> warnings;

  /// 2 rho / c5 + h0: accuracy guaranteed for near pairs that pass the W gate.
  double near_pair_bound() const noexcept { return 2.0 * rho / c5 + h0; }
  nlohmann::json to_json() const;
};

/// Truncation error bound of the L-truncated estimator.
double truncation_error(double L, double D, double beta) noexcept;

ParameterLedger derive_parameters(const GeometryBounds& bounds, const MaskSpec& mask, const NoiseSpec& noise,
                                  const ParameterInputs& inputs);

/// Sum over witnesses observed from both rows of min(|a - b|^2, L), and their count.
struct WitnessSums {
  double sum_sq = 0.0;
  std::uint32_t count = 0;
};

WitnessSums witness_sums(std::span<const double> a, std::span<const std::uint8_t> fa, std::span<const double> b,
                         std::span<const std::uint8_t> fb, double L) noexcept;

/// T over I0 x I1 (rows j in I0, columns k - N0 for k in I1).
DenseTable<std::uint32_t> compute_T(const ObservedDistances& obs, const NetSplit& split, unsigned threads = 1);

/// K^L over I0 x I1; L = +inf gives the untruncated estimator.
DenseTable<double> compute_KL(const ObservedDistances& obs, const NetSplit& split, double sigma, double L,
                              unsigned threads = 1);

/// Cutoff weights beta1(T / (b N2)) psi_rho(K^L) over I0 x I1.
DenseTable<double> neighbor_weights(const DenseTable<std::uint32_t>& T, const DenseTable<double>& KL,
                                    const NetSplit& split, const ParameterLedger& ledger);

struct VWQ {
  DenseTable<double> V;
  DenseTable<double> W;
  DenseTable<double> Q;
};

VWQ compute_VWQ(const ObservedDistances& obs, const NetSplit& split, const DenseTable<std::uint32_t>& T,
                const DenseTable<double>& KL, const ParameterLedger& ledger, unsigned threads = 1);

/// Splits Q into the noise-free part Q1 (true distances in place of observations) and Q2 = Q - Q1.
using TruthFn = std::function<double(std::size_t, std::size_t)>;
struct QDecomposition {
  DenseTable<double> Q1;
  DenseTable<double> Q2;
};
QDecomposition decompose_q(const ObservedDistances& obs, const NetSplit& split, const DenseTable<double>& weights,
                           const VWQ& vwq, double D, const TruthFn& truth);

struct ApproxDistances {
  DenseTable<double> dapp;
  /// Number of ordered directions (0, 1 or 2) whose W exceeded u2.
  DenseTable<std::uint8_t> passed;
};

ApproxDistances approx_distances(const DenseTable<double>& Q, const DenseTable<double>& W, double u2, double D);

struct EstimatorTable {
  NetSplit split;
  DenseTable<std::uint32_t> T;
  DenseTable<double> KL;
  DenseTable<double> weights;
  DenseTable<double> V;
  DenseTable<double> W;
  DenseTable<double> Q;
  DenseTable<double> dapp;
  DenseTable<std::uint8_t> passed;
};

struct PipelineOptions {
  unsigned threads = 1;
};

EstimatorTable run_pipeline(const ObservedDistances& obs, const NetSplit& split, const ParameterLedger& ledger,
                            const PipelineOptions& options = {});

/// Writes `i,j,<value_name>,<flag_name>` rows for i < j.
void save_pair_table(const std::filesystem::path& path, const DenseTable<double>& values,
                     const DenseTable<std::uint8_t>& flags, const std::string& value_name,
                     const std::string& flag_name);
/// Reads a pair table back; the diagonal is 0 and the flags table mirrors the file.
std::pair<DenseTable<double>, DenseTable<std::uint8_t>> load_pair_table(const std::filesystem::path& path);

}  // namespace geonet
