#include <benchmark/benchmark.h>

#include "geonet/metric_models.hpp"
#include "geonet/rng.hpp"

namespace geonet {
namespace {

ManifoldModel model_of(int kind) {
  return kind == 0 ? ManifoldModel::sphere(2, 1.0) : ManifoldModel::flat_torus({1.0, 1.0});
}

void BM_Distance(benchmark::State& state) {
  const ManifoldModel m = model_of(static_cast<int>(state.range(0)));
  const SampleSet s = sample_points(m, 1024, DensitySpec::uniform(), 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(m.distance(s.point(i & 1023), s.point((i * 7 + 3) & 1023)));
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Distance)->Arg(0)->Arg(1)->ArgName("torus");

void BM_SamplePoints(benchmark::State& state) {
  const ManifoldModel m = ManifoldModel::sphere(2, 1.0);
  const DensitySpec density = state.range(0) == 0 ? DensitySpec::uniform() : DensitySpec::tilt(0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_points(m, 10'000, density, 3));
  }
  state.SetItemsProcessed(state.iterations() * 10'000);
}
BENCHMARK(BM_SamplePoints)->Arg(0)->Arg(1)->ArgName("tilt");

void BM_Philox(benchmark::State& state) {
  CounterStream r(7, StreamTag::kNoise, 1, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(r.next_u32());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Philox);

}  // namespace
}  // namespace geonet
