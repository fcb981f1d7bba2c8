#include "geonet/cli/experiment.hpp"

#include <algorithm>

namespace geonet::cli {

SimulationData simulate(const ExperimentConfig& config, std::uint64_t seed, unsigned threads) {
  const NetSplit split = config.resolved_split();
  split.validate();
  SampleSet samples = sample_points(config.model, split.total(), config.density, seed);
  GenerateOptions options;
  options.row_limit = split.begin2();
  options.threads = threads;
  ObservedDistances obs = generate_observations(config.model, samples, config.noise, config.mask, seed, options);
  return {split, std::move(samples), std::move(obs)};
}

double c4_hat_of(const ExperimentConfig& config) {
  ParameterInputs provisional = config.ledger.inputs;
  provisional.c5 = 1.0;
  provisional.allow_rho_above_r1 = true;
  return derive_parameters(model_bounds(config.model, config.density), config.mask, config.noise, provisional)
      .c4_hat;
}

LedgerResult build_ledger(const ExperimentConfig& config, unsigned threads) {
  LedgerResult r;
  ParameterInputs inputs = config.ledger.inputs;
  if (config.ledger.calibrate_c5) {
    OracleConfig oracle = config.oracle;
    oracle.seed = config.seed;
    oracle.threads = threads;
    r.c5 = estimate_c5(config.model, config.density, config.mask, c4_hat_of(config), oracle,
                       config.calibrate.c5_pairs);
    inputs.c5 = std::min(1.0, r.c5->c5);
  }
  r.ledger = derive_parameters(model_bounds(config.model, config.density), config.mask, config.noise, inputs);
  return r;
}

ReportTargets dapp_targets(const ParameterLedger& ledger, const VerifyConfig& verify) {
  const double near = verify.bound == VerifyConfig::Bound::kNearPair ? ledger.near_pair_bound() : ledger.eps1;
  return {ledger.r1, near, ledger.r1 - ledger.eps1, verify.max_violation_rate};
}

ScenarioResult run_scenario(const ExperimentConfig& config, const ParameterLedger& ledger, std::uint64_t seed,
                            unsigned threads) {
  SimulationData data = simulate(config, seed, threads);
  ScenarioResult r;
  r.split = data.split;
  r.table = run_pipeline(data.obs, data.split, ledger, {threads});
  r.truth = truth_table(data.samples, 0, data.split.N0, threads);
  r.report = error_report(r.table.dapp, r.truth, dapp_targets(ledger, config.verify));
  return r;
}

}  // namespace geonet::cli
