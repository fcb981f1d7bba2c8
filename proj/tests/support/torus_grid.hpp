#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "geonet/analysis.hpp"

namespace geonet::testing {

/// Square grid on a flat torus whose approximate distance is the true one
/// perturbed by an independent fair sign times delta_hat per pair.
struct TorusGrid {
  std::size_t m;
  double period;
  double delta_hat;
  std::uint64_t seed;
  ManifoldModel model;
  DenseTable<double> coords;

  TorusGrid(std::size_t m_, double period_, double delta_hat_, std::uint64_t seed_)
      : m(m_), period(period_), delta_hat(delta_hat_), seed(seed_), model(ManifoldModel::flat_torus({period_, period_})),
        coords(m_ * m_, 2) {
    const double h = period / static_cast<double>(m);
    for (std::size_t i = 0; i < m * m; ++i) {
      coords(i, 0) = static_cast<double>(i % m) * h;
      coords(i, 1) = static_cast<double>(i / m) * h;
    }
  }

  std::size_t index(std::size_t x, std::size_t y) const { return y * m + x; }

  double true_distance(std::size_t i, std::size_t j) const { return model.distance(coords.row(i), coords.row(j)); }

  CoarseNet net() const {
    return CoarseNet(m * m, [this](std::size_t i, std::size_t j) {
      return perturbed_distance(true_distance(i, j), delta_hat, seed, i, j);
    });
  }

  std::vector<Point> materialize(const std::vector<RefinedPoint>& points) const {
    std::vector<Point> out;
    out.reserve(points.size());
    for (const auto& y : points) {
      out.push_back(materialize_refined_point(model, [this](std::size_t i) { return coords.row(i); }, y));
    }
    return out;
  }
};

}  // namespace geonet::testing
