#pragma once

#include <cstdint>
#include <optional>

#include "geonet/analysis.hpp"
#include "geonet/cli/config.hpp"

namespace geonet::cli {

struct SimulationData {
  NetSplit split;
  SampleSet samples;
  ObservedDistances obs;
};

/// Samples and observations for one seed; only rows below N0 + N1 are stored.
SimulationData simulate(const ExperimentConfig& config, std::uint64_t seed, unsigned threads);

struct LedgerResult {
  ParameterLedger ledger;
  std::optional<C5Estimate> c5;
};

/// Ledger from the config, calibrating c5 with the oracle when requested.
LedgerResult build_ledger(const ExperimentConfig& config, unsigned threads);

/// c4_hat of the configured scenario, independent of c5.
double c4_hat_of(const ExperimentConfig& config);

/// Near pairs within the chosen bound, far pairs at least r1 - eps1.
ReportTargets dapp_targets(const ParameterLedger& ledger, const VerifyConfig& verify);

struct ScenarioResult {
  NetSplit split;
  EstimatorTable table;
  DenseTable<double> truth;
  ErrorReport report;
};

/// simulate, run_pipeline and error_report in memory.
ScenarioResult run_scenario(const ExperimentConfig& config, const ParameterLedger& ledger, std::uint64_t seed,
                            unsigned threads);

}  // namespace geonet::cli
