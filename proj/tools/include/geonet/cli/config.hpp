#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geonet/analysis.hpp"
#include "geonet/chart_refine.hpp"
#include "geonet/metric_models.hpp"
#include "geonet/net_estimators.hpp"
#include "geonet/observation.hpp"

namespace geonet::cli {

inline constexpr int kSchemaVersion = 1;

struct LedgerConfig {
  ParameterInputs inputs;
  /// c5 from the oracle instead of `inputs.c5`.
  bool calibrate_c5 = false;
};

struct RefineConfig {
  enum class Source { kDapp, kPerturbedTruth };
  Source source = Source::kDapp;
  double delta_hat = 1e-3;
  std::optional<double> r_hat;
  std::optional<double> K;
  RefineOptions options;
  /// Accuracy constant of the refined distance report, in units of delta_hat.
  double C4 = 60.0;

  RefinementScales scales(int n) const;
};

struct VerifyConfig {
  enum class Target { kDapp, kObservations };
  /// Near-pair tolerance: eps1, or the near-pair bound 2 rho / c5 + h0.
  enum class Bound { kEps1, kNearPair };
  Target target = Target::kDapp;
  Bound bound = Bound::kEps1;
  double max_violation_rate = 0.0;
  /// Radius of the net-density check; defaults to the ledger delta1.
  std::optional<double> net_delta;
};

struct CalibrateConfig {
  /// Size constants grown by the doubling protocol, in order.
  std::vector<std::string> constants;
  std::size_t seeds = 20;
  /// Success rate to reach; defaults to 1 - theta.
  std::optional<double> target;
  double factor = 2.0;
  int max_steps = 8;
  std::size_t c5_pairs = 1000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output = "geonet_out";
  ManifoldModel model = ManifoldModel::sphere(2, 1.0);
  DensitySpec density;
  NoiseSpec noise;
  MaskSpec mask = MaskSpec::constant(1.0);
  std::optional<NetSplit> split;
  SizeConstants sizes;
  LedgerConfig ledger;
  OracleConfig oracle;
  RefineConfig refine;
  VerifyConfig verify;
  CalibrateConfig calibrate;

  /// Explicit split, or the one from the size formulas.
  NetSplit resolved_split() const;
  nlohmann::json to_json() const;
};

/// Validates the schema (unknown keys are errors) and builds the config. Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace geonet::cli
