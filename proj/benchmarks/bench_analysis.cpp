#include <benchmark/benchmark.h>

#include "geonet/analysis.hpp"

namespace geonet {
namespace {

const ManifoldModel kSphere = ManifoldModel::sphere(2, 1.0);

void BM_KPhiOracle(benchmark::State& state) {
  OracleConfig cfg;
  cfg.M_int = static_cast<std::size_t>(state.range(0));
  const WitnessCloud cloud(kSphere, DensitySpec::uniform(), cfg);
  const MaskSpec mask = MaskSpec::exponential(0.9, 1.0);
  const Point y{0.0, 0.0, 1.0};
  const Point z{0.0, 0.6, 0.8};
  for (auto _ : state) {
    benchmark::DoNotOptimize(kphi_oracle(kSphere, mask, cloud, y, z));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KPhiOracle)->Arg(20'000)->Arg(100'000)->Unit(benchmark::kMicrosecond);

void BM_IsDeltaNet(benchmark::State& state) {
  const SampleSet s = sample_points(kSphere, static_cast<std::size_t>(state.range(0)), DensitySpec::uniform(), 3);
  OracleConfig cfg;
  cfg.budget = 20'000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(is_delta_net(s.points(), kSphere, 0.2, cfg));
  }
}
BENCHMARK(BM_IsDeltaNet)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace geonet
