#include <benchmark/benchmark.h>

#include "geonet/net_estimators.hpp"
#include "geonet/observation.hpp"

namespace geonet {
namespace {

const ManifoldModel kSphere = ManifoldModel::sphere(2, 1.0);

struct Scenario {
  NetSplit split;
  ObservedDistances obs;
  ParameterLedger ledger;
};

Scenario scenario(std::size_t N0) {
  const NetSplit split{N0, 4 * N0, 8 * N0};
  const SampleSet s = sample_points(kSphere, split.total(), DensitySpec::uniform(), 1);
  const MaskSpec mask = MaskSpec::exponential(0.9, 1.0);
  const NoiseSpec noise = NoiseSpec::gaussian(0.1);
  GenerateOptions go;
  go.row_limit = split.begin2();
  ParameterInputs in;
  in.eps1 = 0.1;
  in.c5 = 1.0;
  in.rho_rule = RhoRule::kMatchedAccuracy;
  return {split, generate_observations(kSphere, s, noise, mask, 2, go),
          derive_parameters(model_bounds(kSphere), mask, noise, in)};
}

void BM_GenerateObservations(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  const SampleSet s = sample_points(kSphere, N, DensitySpec::uniform(), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        generate_observations(kSphere, s, NoiseSpec::gaussian(0.1), MaskSpec::exponential(0.9, 1.0), 2));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(N * (N - 1) / 2));
}
BENCHMARK(BM_GenerateObservations)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ComputeKL(benchmark::State& state) {
  const Scenario sc = scenario(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_KL(sc.obs, sc.split, sc.ledger.sigma, sc.ledger.L));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(sc.split.N0 * sc.split.N1 * sc.split.N2));
}
BENCHMARK(BM_ComputeKL)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_RunPipeline(benchmark::State& state) {
  const Scenario sc = scenario(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_pipeline(sc.obs, sc.split, sc.ledger));
  }
}
BENCHMARK(BM_RunPipeline)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace geonet
