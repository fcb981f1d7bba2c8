#include <benchmark/benchmark.h>

#include "geonet/analysis.hpp"
#include "geonet/chart_refine.hpp"

namespace geonet {
namespace {

constexpr std::size_t kGrid = 150;
constexpr double kPeriod = 0.5;

DenseTable<double> grid_coords() {
  DenseTable<double> c(kGrid * kGrid, 2);
  const double h = kPeriod / kGrid;
  for (std::size_t i = 0; i < kGrid * kGrid; ++i) {
    c(i, 0) = static_cast<double>(i % kGrid) * h;
    c(i, 1) = static_cast<double>(i / kGrid) * h;
  }
  return c;
}

void BM_Refine(benchmark::State& state) {
  const ManifoldModel torus = ManifoldModel::flat_torus({kPeriod, kPeriod});
  const DenseTable<double> coords = grid_coords();
  const CoarseNet net(kGrid * kGrid, [&](std::size_t i, std::size_t j) {
    return perturbed_distance(torus.distance(coords.row(i), coords.row(j)), 1e-3, 7, i, j);
  });
  const auto scales = make_scales_with_radius(1e-3, 0.1, 2);
  RefineOptions opt;
  opt.budget = static_cast<std::size_t>(state.range(0));
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      opt.charts.push_back((70 + 4 * a) * kGrid + 70 + 4 * b);
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(refine(net, scales, opt));
  }
}
BENCHMARK(BM_Refine)->Arg(16)->Arg(64)->ArgName("budget")->Unit(benchmark::kMillisecond);

void BM_SimplexGrid(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simplex_grid(n, 0.02, 5'000'000));
  }
}
BENCHMARK(BM_SimplexGrid)->Arg(2)->Arg(3)->ArgName("n")->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace geonet
