#include "geonet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "geonet/csv.hpp"
#include "geonet/errors.hpp"
#include "geonet/parallel.hpp"
#include "geonet/rng.hpp"

namespace geonet {

nlohmann::json OracleConfig::to_json() const {
  return {{"M_int", M_int},   {"seed", seed},       {"quadrature", quadrature},
          {"M_outer", M_outer}, {"budget", budget}};
}

WitnessCloud::WitnessCloud(const ManifoldModel& model, const DensitySpec& density, const OracleConfig& cfg) {
  if (cfg.M_int == 0) {
    throw ParameterError("oracle needs at least one integration point");
  }
  const bool uniform = density.kind == DensitySpec::Kind::kUniform || density.amplitude == 0.0;
  const std::size_t k = model.coordinate_count();
  if (cfg.quadrature && uniform && model.kind() == ModelKind::kSphere && model.dimension() == 2) {
    // Fibonacci lattice.
    const std::size_t M = cfg.M_int;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double R = model.radius();
    points_ = DenseTable<double>(M, 3);
    for (std::size_t i = 0; i < M; ++i) {
      const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(M);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(i);
      points_(i, 0) = R * r * std::cos(phi);
      points_(i, 1) = R * r * std::sin(phi);
      points_(i, 2) = R * z;
    }
    lattice_ = true;
    return;
  }
  if (cfg.quadrature && uniform && model.kind() == ModelKind::kFlatTorus) {
    // Midpoint grid.
    const int n = model.dimension();
    const auto m = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(cfg.M_int), 1.0 / n) - 1e-9));
    std::size_t M = 1;
    for (int d = 0; d < n; ++d) {
      M *= m;
    }
    points_ = DenseTable<double>(M, k);
    for (std::size_t i = 0; i < M; ++i) {
      std::size_t rest = i;
      for (std::size_t d = 0; d < k; ++d) {
        const std::size_t c = rest % m;
        rest /= m;
        points_(i, d) = (static_cast<double>(c) + 0.5) / static_cast<double>(m) * model.periods()[d];
      }
    }
    lattice_ = true;
    return;
  }
  points_ = DenseTable<double>(cfg.M_int, k);
  for (std::size_t i = 0; i < cfg.M_int; ++i) {
    const Point p = sample_one(model, density, cfg.seed, StreamTag::kOracle, i);
    std::copy(p.begin(), p.end(), points_.row(i).begin());
  }
}

KPhiValue kphi_oracle(const ManifoldModel& model, const MaskSpec& mask, const WitnessCloud& cloud, PointView y,
                      PointView z) {
  double sk = 0.0;
  double sk2 = 0.0;
  double sa = 0.0;
  double sa2 = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const PointView x = cloud.point(i);
    const double dy = model.distance(y, x);
    const double dz = model.distance(z, x);
    const double a = mask.phi(model, y, x, dy) * mask.phi(model, x, z, dz);
    const double k = (dy - dz) * (dy - dz) * a;
    sk += k;
    sk2 += k * k;
    sa += a;
    sa2 += a * a;
  }
  const double M = static_cast<double>(cloud.size());
  KPhiValue v;
  v.k = sk / M;
  v.A = sa / M;
  const double dof = std::max(1.0, M - 1.0);
  v.k_se = std::sqrt(std::max(0.0, sk2 / M - v.k * v.k) * M / dof / M);
  v.A_se = std::sqrt(std::max(0.0, sa2 / M - v.A * v.A) * M / dof / M);
  return v;
}

KPhiValue kphi_oracle(const ManifoldModel& model, const DensitySpec& density, const MaskSpec& mask, PointView y,
                      PointView z, const OracleConfig& cfg) {
  model.validate_point(y);
  model.validate_point(z);
  return kphi_oracle(model, mask, WitnessCloud(model, density, cfg), y, z);
}

std::vector<OraclePair> oracle_pairs(const ManifoldModel& model, const DensitySpec& density, const MaskSpec& mask,
                                     std::size_t count, std::size_t first, const OracleConfig& cfg) {
  const WitnessCloud cloud(model, density, cfg);
  std::vector<OraclePair> pairs(count);
  parallel_for(count, cfg.threads, [&](std::size_t i) {
    OraclePair& p = pairs[i];
    p.y = sample_one(model, density, cfg.seed, StreamTag::kPairSelection, first + i, 0);
    p.z = sample_one(model, density, cfg.seed, StreamTag::kPairSelection, first + i, 1);
    p.d = model.distance(p.y, p.z);
    p.value = kphi_oracle(model, mask, cloud, p.y, p.z);
    p.ratio = p.d > 0.0 ? std::sqrt(std::max(0.0, p.value.k)) / p.d : 0.0;
  });
  return pairs;
}

nlohmann::json C5Estimate::to_json() const {
  return {{"c5", c5}, {"min_ratio", min_ratio}, {"pairs", pairs}, {"gated", gated}};
}

C5Estimate estimate_c5(std::span<const OraclePair> pairs, double c4_hat) {
  C5Estimate e;
  e.pairs = pairs.size();
  e.min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& p : pairs) {
    if (p.d > 0.0 && p.value.A >= c4_hat) {
      ++e.gated;
      e.min_ratio = std::min(e.min_ratio, p.ratio);
    }
  }
  if (e.gated == 0) {
    throw CalibrationError("no oracle pair has A >= " + csv::format_double(c4_hat) + "; c5 cannot be estimated");
  }
  e.c5 = 0.9 * e.min_ratio;
  if (!(e.c5 > 0.0)) {
    throw CalibrationError("minimum Kuratowski ratio is zero; c5 cannot be estimated");
  }
  return e;
}

C5Estimate estimate_c5(const ManifoldModel& model, const DensitySpec& density, const MaskSpec& mask, double c4_hat,
                       const OracleConfig& cfg, std::size_t pairs, std::size_t first) {
  const auto sample = oracle_pairs(model, density, mask, pairs, first, cfg);
  return estimate_c5(sample, c4_hat);
}

double w_minus_oracle(const ManifoldModel& model, const DensitySpec& density, const MaskSpec& mask,
                      const ParameterLedger& ledger, PointView y, PointView z, const OracleConfig& cfg) {
  model.validate_point(y);
  model.validate_point(z);
  const WitnessCloud inner(model, density, cfg);
  OracleConfig outer_cfg = cfg;
  outer_cfg.M_int = cfg.M_outer;
  outer_cfg.seed = cfg.seed ^ 0x5bd1e995u;
  const WitnessCloud outer(model, density, outer_cfg);
  std::vector<double> terms(outer.size(), 0.0);
  parallel_for(outer.size(), cfg.threads, [&](std::size_t i) {
    const PointView x = outer.point(i);
    const double phi_zx = mask.phi(model, z, x);
    if (phi_zx == 0.0) {
      return;
    }
    const KPhiValue v = kphi_oracle(model, mask, inner, y, x);
    terms[i] = beta1(v.A / ledger.b) * phi_zx * psi_rho(v.k, ledger.rho / 2.0);
  });
  double s = 0.0;
  for (double t : terms) {
    s += t;
  }
  return s / static_cast<double>(outer.size());
}

nlohmann::json NetCheck::to_json() const {
  return {{"verdict", verdict},
          {"gap", gap},
          {"reference_points", reference_points},
          {"reduced_confidence", reduced_confidence}};
}

NetCheck is_delta_net(const DenseTable<double>& samples, const ManifoldModel& model, double delta,
                      const OracleConfig& cfg) {
  NetCheck r;
  const double D = model.diameter();
  const double wanted = 10.0 * static_cast<double>(std::max<std::size_t>(samples.rows(), 1)) *
                        std::pow(D / delta, model.dimension());
  std::size_t count = cfg.budget;
  if (wanted <= static_cast<double>(cfg.budget)) {
    count = static_cast<std::size_t>(std::ceil(wanted));
  } else {
    r.reduced_confidence = true;
  }
  r.reference_points = count;
  if (samples.rows() == 0) {
    r.gap = std::numeric_limits<double>::infinity();
    r.verdict = delta >= D;
    return r;
  }

  // Squared chord (sphere) or squared geodesic (torus): both increase with the distance.
  const bool sphere = model.kind() == ModelKind::kSphere;
  const std::vector<double> periods = model.periods();
  auto proxy = [&](PointView a, PointView b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
      double diff = std::abs(a[d] - b[d]);
      if (!sphere) {
        diff = std::min(diff, periods[d] - diff);
      }
      s += diff * diff;
    }
    return s;
  };
  const unsigned threads = resolve_threads(cfg.threads);
  const std::size_t chunks = std::min<std::size_t>(threads, count);
  std::vector<double> chunk_max(chunks, 0.0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = count * c / chunks;
    const std::size_t end = count * (c + 1) / chunks;
    double worst = 0.0;
    std::size_t last = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const Point x = sample_one(model, DensitySpec::uniform(), cfg.seed, StreamTag::kReference, i);
      // Start from the sample that was nearest to the previous reference point.
      double best = proxy(x, samples.row(last));
      for (std::size_t s = 0; s < samples.rows() && best > worst; ++s) {
        const double d = proxy(x, samples.row(s));
        if (d < best) {
          best = d;
          last = s;
        }
      }
      worst = std::max(worst, best);
    }
    chunk_max[c] = worst;
  });
  const double worst = *std::max_element(chunk_max.begin(), chunk_max.end());
  if (sphere) {
    const double R = model.radius();
    r.gap = 2.0 * R * std::asin(std::min(1.0, std::sqrt(worst) / (2.0 * R)));
  } else {
    r.gap = std::sqrt(worst);
  }
  r.verdict = r.gap < delta || delta >= D;
  return r;
}

nlohmann::json ErrorReport::to_json() const {
  nlohmann::json j = {{"pairs", pairs},
                      {"near_pairs", near_pairs},
                      {"far_pairs", far_pairs},
                      {"near_violations", near_violations},
                      {"far_violations", far_violations},
                      {"near_rate", near_rate},
                      {"far_rate", far_rate},
                      {"near_quantiles",
                       {{"q50", near_quantiles.at(0)},
                        {"q90", near_quantiles.at(1)},
                        {"q99", near_quantiles.at(2)},
                        {"max", near_quantiles.at(3)}}},
                      {"far_min", far_min},
                      {"targets",
                       {{"r1", targets.r1},
                        {"near_bound", targets.near_bound},
                        {"far_floor", targets.far_floor},
                        {"max_violation_rate", targets.max_violation_rate}}},
                      {"pass", pass}};
  if (net) {
    j["net"] = net->to_json();
  }
  if (!ledger.is_null()) {
    j["ledger"] = ledger;
  }
  return j;
}

namespace {

void check_square(const DenseTable<double>& approx, const DenseTable<double>& truth,
                  const DenseTable<std::uint8_t>* include) {
  if (approx.rows() != approx.cols() || truth.rows() != truth.cols() || approx.rows() != truth.rows() ||
      (include != nullptr && (include->rows() != approx.rows() || include->cols() != approx.cols()))) {
    throw InputError("error report needs square tables over the same index set");
  }
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) {
    return 0.0;
  }
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace

ErrorReport error_report(const DenseTable<double>& approx, const DenseTable<double>& truth,
                         const ReportTargets& targets, const DenseTable<std::uint8_t>* include) {
  check_square(approx, truth, include);
  ErrorReport r;
  r.targets = targets;
  r.far_min = std::numeric_limits<double>::infinity();
  std::vector<double> errors;
  const std::size_t N = truth.rows();
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      if (include != nullptr && (*include)(i, j) == 0) {
        continue;
      }
      ++r.pairs;
      const double d = truth(i, j);
      const double a = approx(i, j);
      if (d < targets.r1) {
        ++r.near_pairs;
        const double e = std::abs(a - d);
        errors.push_back(e);
        if (!(e <= targets.near_bound)) {
          ++r.near_violations;
        }
      } else {
        ++r.far_pairs;
        r.far_min = std::min(r.far_min, a);
        if (!(a >= targets.far_floor)) {
          ++r.far_violations;
        }
      }
    }
  }
  std::sort(errors.begin(), errors.end());
  r.near_quantiles = {quantile(errors, 0.5), quantile(errors, 0.9), quantile(errors, 0.99), quantile(errors, 1.0)};
  r.near_rate = r.near_pairs > 0 ? static_cast<double>(r.near_violations) / static_cast<double>(r.near_pairs) : 0.0;
  r.far_rate = r.far_pairs > 0 ? static_cast<double>(r.far_violations) / static_cast<double>(r.far_pairs) : 0.0;
  if (r.far_pairs == 0) {
    r.far_min = 0.0;
  }
  r.pass = r.near_rate <= targets.max_violation_rate && r.far_rate <= targets.max_violation_rate;
  return r;
}

void write_error_csv(const std::filesystem::path& path, const DenseTable<double>& approx,
                     const DenseTable<double>& truth, double r1, const DenseTable<std::uint8_t>* include) {
  check_square(approx, truth, include);
  auto out = csv::open_output(path);
  out << "i,j,truth,approx,error,near\n";
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t j = i + 1; j < truth.rows(); ++j) {
      if (include != nullptr && (*include)(i, j) == 0) {
        continue;
      }
      const double d = truth(i, j);
      const double a = approx(i, j);
      out << i << ',' << j << ',' << csv::format_double(d) << ',' << csv::format_double(a) << ','
          << csv::format_double(std::abs(a - d)) << ',' << (d < r1 ? 1 : 0) << '\n';
    }
  }
  if (!out) {
    throw InputError("failed writing " + path.string());
  }
}

DenseTable<double> truth_table(const SampleSet& samples, std::size_t begin, std::size_t count, unsigned threads) {
  if (begin + count > samples.size()) {
    throw InputError("truth table range exceeds the sample set");
  }
  const ManifoldModel& model = samples.model();
  DenseTable<double> t(count, count, 0.0);
  parallel_for(count, threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < count; ++j) {
      if (i != j) {
        t(i, j) = model.distance(samples.point(begin + i), samples.point(begin + j));
      }
    }
  });
  return t;
}

Point materialize_refined_point(const ManifoldModel& model, const std::function<PointView(std::size_t)>& coarse,
                                const RefinedPoint& y) {
  const PointView p = coarse(y.chart);
  Point v(model.coordinate_count(), 0.0);
  for (std::size_t i = 1; i < y.anchor_count(); ++i) {
    const double t = y.weight(i);
    if (t == 0.0) {
      continue;
    }
    const Point w = model.log_map(p, coarse(y.anchor(i)));
    for (std::size_t d = 0; d < v.size(); ++d) {
      v[d] += t * w[d];
    }
  }
  return model.exp_map(p, v);
}

double perturbed_distance(double d, double delta_hat, std::uint64_t seed, std::size_t i, std::size_t j) {
  if (i == j) {
    return 0.0;
  }
  CounterStream stream(seed, StreamTag::kPerturbation, std::min(i, j), std::max(i, j));
  const double sign = (stream.next_u32() & 1u) != 0 ? 1.0 : -1.0;
  return std::max(0.0, d + sign * delta_hat);
}

nlohmann::json CalibrationResult::to_json() const {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : history) {
    steps.push_back({{"value", s.value}, {"success", s.success}});
  }
  return {{"value", value}, {"history", steps}};
}

CalibrationResult calibrate_doubling(const std::function<double(double)>& success_rate, double start, double target,
                                     double factor, int max_steps) {
  if (!(start > 0.0) || !(factor > 0.0) || factor == 1.0) {
    throw ParameterError("calibration needs a positive start and a factor other than 1");
  }
  CalibrationResult r;
  double value = start;
  bool previous_ok = false;
  for (int step = 0; step < max_steps; ++step) {
    const double s = success_rate(value);
    r.history.push_back({value, s});
    if (s >= target) {
      if (previous_ok) {
        r.value = value / factor;
        return r;
      }
      previous_ok = true;
    } else {
      previous_ok = false;
    }
    value *= factor;
  }
  throw CalibrationError("target " + csv::format_double(target) + " not reached twice in a row after " +
                         std::to_string(max_steps) + " steps");
}

}  // namespace geonet
