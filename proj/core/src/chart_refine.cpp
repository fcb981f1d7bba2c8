#include "geonet/chart_refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <unordered_map>

#include "geonet/csv.hpp"
#include "geonet/errors.hpp"
#include "geonet/parallel.hpp"
#include "geonet/rng.hpp"

namespace geonet {
namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

using PositionMap = std::unordered_map<std::size_t, std::size_t>;

PositionMap positions(std::span<const std::size_t> X) {
  PositionMap map;
  map.reserve(X.size() * 2);
  for (std::size_t i = 0; i < X.size(); ++i) {
    map.emplace(X[i], i);
  }
  return map;
}

// Anchor rows and weights of one refined point, plus G = (1/2) sum t_i t_k d~(a_i, a_k)^2.
struct Expansion {
  std::vector<std::size_t> rows;
  std::vector<double> weights;
  double G = 0.0;
};

Expansion expand(const CoarseNet& net, const RefinedPoint& y, std::size_t chart, const PositionMap& pos) {
  if (y.chart != chart) {
    throw InputError("refined point belongs to chart " + std::to_string(y.chart) + ", expected " +
                     std::to_string(chart));
  }
  Expansion e;
  const std::size_t m = y.anchor_count();
  e.rows.resize(m);
  e.weights.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto it = pos.find(y.anchor(i));
    if (it == pos.end()) {
      throw InputError("anchor " + std::to_string(y.anchor(i)) + " is not in X_" + std::to_string(chart));
    }
    e.rows[i] = it->second;
    e.weights[i] = y.weight(i);
  }
  double g = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      const double d = net(y.anchor(i), y.anchor(k));
      g += e.weights[i] * e.weights[k] * d * d;
    }
  }
  e.G = 0.5 * g;
  return e;
}

// (1/2) sum_{i,k} t_i t_k (Q(a_i, y) + Q(a_k, y) - Q(a_i, a_k)) given the column Q(., y).
template <class Column>
double recurse(const Expansion& e, const Column& column) {
  const std::size_t m = e.rows.size();
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double qi = column(e.rows[i]);
    for (std::size_t k = 0; k < m; ++k) {
      s += e.weights[i] * e.weights[k] * (qi + column(e.rows[k]));
    }
  }
  return 0.5 * s - e.G;
}

std::uint64_t binomial(std::uint64_t a, std::uint64_t b, std::uint64_t cap) {
  // C(a, b) computed incrementally; saturates at cap + 1.
  b = std::min(b, a - b);
  long double r = 1.0L;
  for (std::uint64_t i = 1; i <= b; ++i) {
    r = r * static_cast<long double>(a - b + i) / static_cast<long double>(i);
    if (r > static_cast<long double>(cap)) {
      return cap + 1;
    }
  }
  return static_cast<std::uint64_t>(std::llround(r));
}

std::uint64_t grid_resolution(int n, double eps_prime) {
  if (!(eps_prime > 0.0) || n < 1) {
    throw ParameterError("simplex grid needs n >= 1 and eps' > 0");
  }
  const double M = std::ceil(std::sqrt(static_cast<double>(n)) / eps_prime);
  if (!(M < 1e15)) {
    throw TooFineError("simplex grid resolution overflows");
  }
  return static_cast<std::uint64_t>(M);
}

}  // namespace

nlohmann::json RefinementScales::to_json() const {
  return {{"delta_hat", delta_hat}, {"r_hat", r_hat},   {"K", K},
          {"n", n},                 {"eps_prime", eps_prime}, {"gate_ok", gate_ok()}};
}

RefinementScales make_scales(double delta_hat, double K, int n) {
  if (!(delta_hat > 0.0) || !(K > 0.0) || n < 1) {
    throw ParameterError("refinement scales need delta_hat > 0, K > 0 and n >= 1");
  }
  return make_scales_with_radius(delta_hat, std::cbrt(delta_hat / K), n);
}

RefinementScales make_scales_with_radius(double delta_hat, double r_hat, int n) {
  if (!(delta_hat > 0.0) || !(r_hat > 0.0) || n < 1) {
    throw ParameterError("refinement scales need delta_hat > 0, r_hat > 0 and n >= 1");
  }
  RefinementScales s;
  s.delta_hat = delta_hat;
  s.r_hat = r_hat;
  s.K = delta_hat / (r_hat * r_hat * r_hat);
  s.n = n;
  s.eps_prime = delta_hat / (3.0 * r_hat * std::sqrt(static_cast<double>(n)));
  return s;
}

CascadeScales scale_cascade(double delta, double Lambda) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ParameterError("delta must lie in (0, 1)");
  }
  if (!(Lambda > 0.0)) {
    throw ParameterError("scale cascade needs Lambda > 0; supply r_hat explicitly for flat models");
  }
  CascadeScales c;
  c.eps1 = std::pow(delta, 1.5);
  c.delta_hat = c.eps1;
  c.delta1 = std::pow(Lambda, 2.0 / 3.0) * std::sqrt(delta) / 20.0;
  c.r_hat = std::cbrt(c.delta_hat / (Lambda * Lambda));
  return c;
}

CoarseNet::CoarseNet(DenseTable<double> table)
    : size_(table.rows()), table_(std::make_shared<const DenseTable<double>>(std::move(table))) {
  if (table_->rows() != table_->cols()) {
    throw InputError("coarse distance table must be square");
  }
  const DenseTable<double>* t = table_.get();
  fn_ = [t](std::size_t i, std::size_t j) { return (*t)(i, j); };
}

CoarseNet::CoarseNet(std::size_t size, DistanceFn fn) : size_(size), fn_(std::move(fn)) {}

std::vector<std::size_t> neighbor_set(const CoarseNet& net, const RefinementScales& scales, std::size_t p) {
  const double radius = scales.neighbor_radius();
  std::vector<std::size_t> X;
  for (std::size_t x = 0; x < net.size(); ++x) {
    if (net(p, x) < radius) {
      X.push_back(x);
    }
  }
  return X;
}

std::vector<std::vector<std::size_t>> neighbor_sets(const CoarseNet& net, const RefinementScales& scales) {
  std::vector<std::vector<std::size_t>> sets(net.size());
  for (std::size_t p = 0; p < net.size(); ++p) {
    sets[p] = neighbor_set(net, scales, p);
  }
  return sets;
}

std::size_t simplex_grid_size(int n, double eps_prime) {
  const std::uint64_t M = grid_resolution(n, eps_prime);
  const std::uint64_t cap = std::numeric_limits<std::uint64_t>::max() / 2;
  return static_cast<std::size_t>(binomial(M + static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(n), cap));
}

DenseTable<double> simplex_grid(int n, double eps_prime, std::size_t max_points) {
  const std::uint64_t M = grid_resolution(n, eps_prime);
  const std::uint64_t count = binomial(M + static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(n), max_points);
  if (count > max_points) {
    throw TooFineError("simplex grid with M = " + std::to_string(M) + " in dimension " + std::to_string(n) +
                       " has more than " + std::to_string(max_points) + " points");
  }
  DenseTable<double> grid(static_cast<std::size_t>(count), static_cast<std::size_t>(n), 0.0);
  std::vector<std::uint64_t> m(static_cast<std::size_t>(n), 0);
  const double inv = 1.0 / static_cast<double>(M);
  std::size_t row = 0;
  // Odometer over compositions with sum(m) <= M.
  for (;;) {
    for (int i = 0; i < n; ++i) {
      grid(row, static_cast<std::size_t>(i)) = static_cast<double>(m[static_cast<std::size_t>(i)]) * inv;
    }
    ++row;
    std::uint64_t used = 0;
    for (auto v : m) {
      used += v;
    }
    int i = n - 1;
    while (i >= 0) {
      if (used < M) {
        ++m[static_cast<std::size_t>(i)];
        break;
      }
      used -= m[static_cast<std::size_t>(i)];
      m[static_cast<std::size_t>(i)] = 0;
      --i;
    }
    if (i < 0) {
      break;
    }
  }
  return grid;
}

RefinedPoint RefinedPoint::trivial(std::size_t chart, std::size_t x, int n) {
  RefinedPoint r;
  r.chart = chart;
  r.alpha.assign(static_cast<std::size_t>(n), x);
  r.tau.assign(static_cast<std::size_t>(n), 0.0);
  r.tau[0] = 1.0;
  return r;
}

double RefinedPoint::weight(std::size_t i) const noexcept {
  if (i > 0) {
    return tau[i - 1];
  }
  double s = 0.0;
  for (double t : tau) {
    s += t;
  }
  return 1.0 - s;
}

nlohmann::json RefinedPoint::to_json() const {
  return {{"chart", chart}, {"alpha", alpha}, {"tau", tau}};
}

StagedQ squared_distance_Q(const CoarseNet& net, const RefinementScales& scales, std::size_t p,
                           std::span<const std::size_t> Xp, std::span<const RefinedPoint> Yp, std::size_t q,
                           std::span<const std::size_t> Xq, std::span<const RefinedPoint> Yq) {
  const double dpq = net(p, q);
  if (!(dpq < scales.admissible_radius())) {
    throw DomainError("chart pair (" + std::to_string(p) + ", " + std::to_string(q) + ") is not admissible: d~ = " +
                      csv::format_double(dpq));
  }
  const PositionMap pos_p = positions(Xp);
  const PositionMap pos_q = positions(Xq);
  std::vector<Expansion> ep;
  ep.reserve(Yp.size());
  for (const auto& y : Yp) {
    ep.push_back(expand(net, y, p, pos_p));
  }
  std::vector<Expansion> eq;
  eq.reserve(Yq.size());
  for (const auto& y : Yq) {
    eq.push_back(expand(net, y, q, pos_q));
  }

  StagedQ s;
  s.xx = DenseTable<double>(Xp.size(), Xq.size());
  for (std::size_t i = 0; i < Xp.size(); ++i) {
    for (std::size_t j = 0; j < Xq.size(); ++j) {
      const double d = net(Xp[i], Xq[j]);
      s.xx(i, j) = d * d;
    }
  }
  s.yx = DenseTable<double>(Yp.size(), Xq.size());
  for (std::size_t a = 0; a < Yp.size(); ++a) {
    for (std::size_t j = 0; j < Xq.size(); ++j) {
      s.yx(a, j) = recurse(ep[a], [&](std::size_t row) { return s.xx(row, j); });
    }
  }
  s.xy = DenseTable<double>(Xp.size(), Yq.size());
  for (std::size_t i = 0; i < Xp.size(); ++i) {
    for (std::size_t b = 0; b < Yq.size(); ++b) {
      s.xy(i, b) = recurse(eq[b], [&](std::size_t col) { return s.xx(i, col); });
    }
  }
  s.yy = DenseTable<double>(Yp.size(), Yq.size());
  for (std::size_t a = 0; a < Yp.size(); ++a) {
    for (std::size_t b = 0; b < Yq.size(); ++b) {
      s.yy(a, b) = recurse(ep[a], [&](std::size_t row) { return s.xy(row, b); });
    }
  }
  return s;
}

ChartFrame::ChartFrame(std::size_t size) : qp_(size, kUnset), q_(size, size, kUnset) {}

double ChartFrame::base(std::size_t z) const {
  const double v = qp_.at(z);
  if (std::isnan(v)) {
    throw StagingError("Q(p, z) not staged for point " + std::to_string(z));
  }
  return v;
}

double ChartFrame::Q(std::size_t a, std::size_t b) const {
  if (a >= size() || b >= size()) {
    throw StagingError("point outside the chart frame");
  }
  const double v = q_(a, b);
  if (std::isnan(v)) {
    throw StagingError("Q(" + std::to_string(a) + ", " + std::to_string(b) + ") not staged");
  }
  return v;
}

ChartFrame frame_from_self_staging(const StagedQ& pp, std::size_t position_of_p) {
  const std::size_t m = pp.yy.rows();
  if (pp.yy.cols() != m || pp.xy.cols() != m || position_of_p >= pp.xy.rows()) {
    throw InputError("self staging tables do not describe one chart");
  }
  ChartFrame frame(m);
  for (std::size_t a = 0; a < m; ++a) {
    frame.set_base(a, pp.xy(position_of_p, a));
    for (std::size_t b = a; b < m; ++b) {
      frame.set(a, b, pp.yy(a, b));
    }
  }
  return frame;
}

double scalar_product_P(const ChartFrame& frame, std::size_t x, std::size_t y) {
  return 0.5 * (frame.base(x) + frame.base(y) - frame.Q(x, y));
}

BasisResult find_basis(const ChartFrame& frame, std::span<const std::size_t> candidates,
                       const RefinementScales& scales, double C1, std::size_t chart) {
  const double tol = C1 * scales.delta_hat / scales.r_hat;
  const double inv_s = 1.0 / ((scales.r_hat / 6.0) * (scales.r_hat / 6.0));
  const std::size_t n = static_cast<std::size_t>(scales.n);

  std::vector<std::size_t> pool;
  std::vector<double> norm_dev;
  for (std::size_t c : candidates) {
    const double dev = std::abs(scalar_product_P(frame, c, c) * inv_s - 1.0);
    if (dev <= tol) {
      pool.push_back(c);
      norm_dev.push_back(dev);
    }
  }
  if (pool.empty()) {
    throw BasisFailure("chart " + std::to_string(chart) + ": no candidate of norm r_hat/6 within tolerance");
  }

  BasisResult result;
  std::vector<bool> used(pool.size(), false);
  for (std::size_t round = 0; round < n; ++round) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t pick = pool.size();
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (used[c]) {
        continue;
      }
      double worst = norm_dev[c];
      for (std::size_t a : result.basis) {
        worst = std::max(worst, std::abs(scalar_product_P(frame, pool[c], a) * inv_s));
      }
      if (worst < best) {
        best = worst;
        pick = c;
      }
    }
    if (pick == pool.size()) {
      throw BasisFailure("chart " + std::to_string(chart) + ": only " + std::to_string(round) +
                         " candidates available for an " + std::to_string(n) + "-dimensional basis");
    }
    used[pick] = true;
    result.basis.push_back(pool[pick]);
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double target = i == j ? 1.0 : 0.0;
      const double dev = std::abs(scalar_product_P(frame, result.basis[i], result.basis[j]) * inv_s - target);
      result.residual = std::max(result.residual, dev);
    }
  }
  if (result.residual > tol) {
    throw BasisFailure("chart " + std::to_string(chart) + ": best basis deviates by " +
                       csv::format_double(result.residual) + " > tolerance " + csv::format_double(tol));
  }
  return result;
}

DenseTable<double> chart_map_F(const ChartFrame& frame, std::span<const std::size_t> basis,
                               const RefinementScales& scales, std::span<const std::size_t> points) {
  const double inv = 6.0 / scales.r_hat;
  DenseTable<double> F(points.size(), basis.size());
  for (std::size_t r = 0; r < points.size(); ++r) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      F(r, i) = scalar_product_P(frame, points[r], basis[i]) * inv;
    }
  }
  return F;
}

std::size_t default_refinement_budget() {
  if (const char* env = std::getenv("GEONET_BUDGET")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) {
      return static_cast<std::size_t>(v);
    }
  }
  return 256;
}

std::vector<RefinedPoint> chart_points(std::size_t p, std::span<const std::size_t> Xp, const DenseTable<double>& sigma,
                                       std::size_t budget, std::uint64_t seed, bool* subsampled) {
  if (std::find(Xp.begin(), Xp.end(), p) == Xp.end()) {
    throw InputError("X_p must contain p");
  }
  const int n = static_cast<int>(sigma.cols());
  std::vector<RefinedPoint> Y;
  for (std::size_t x : Xp) {
    Y.push_back(RefinedPoint::trivial(p, x, n));
  }
  const long double full = std::pow(static_cast<long double>(Xp.size()), n) * static_cast<long double>(sigma.rows());
  const bool sample = full > static_cast<long double>(budget);
  if (subsampled != nullptr) {
    *subsampled = sample;
  }
  auto make = [&](const std::vector<std::size_t>& idx, std::size_t grid_row) {
    RefinedPoint r;
    r.chart = p;
    for (std::size_t i : idx) {
      r.alpha.push_back(Xp[i]);
    }
    const auto t = sigma.row(grid_row);
    r.tau.assign(t.begin(), t.end());
    return r;
  };
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  if (!sample) {
    for (;;) {
      for (std::size_t g = 0; g < sigma.rows(); ++g) {
        Y.push_back(make(idx, g));
      }
      int i = n - 1;
      while (i >= 0 && ++idx[static_cast<std::size_t>(i)] == Xp.size()) {
        idx[static_cast<std::size_t>(i)] = 0;
        --i;
      }
      if (i < 0) {
        break;
      }
    }
    return Y;
  }
  CounterStream stream(seed, StreamTag::kRefinementSample, p);
  for (std::size_t s = 0; s < budget; ++s) {
    for (auto& v : idx) {
      v = static_cast<std::size_t>(stream.below(Xp.size()));
    }
    Y.push_back(make(idx, static_cast<std::size_t>(stream.below(sigma.rows()))));
  }
  return Y;
}

nlohmann::json ChartDiagnostics::to_json() const {
  nlohmann::json j = {{"chart", chart},         {"neighbors", neighbors},   {"generated", generated},
                      {"kept", kept},           {"partners", partners},     {"subsampled", subsampled},
                      {"basis_residual", basis_residual}};
  if (!failure.empty()) {
    j["failure"] = failure;
  }
  return j;
}

nlohmann::json RefinementResult::diagnostics_json() const {
  nlohmann::json charts_json = nlohmann::json::array();
  for (const auto& c : charts) {
    charts_json.push_back(c.to_json());
  }
  std::size_t covered_pairs = 0;
  for (std::size_t i = 0; i < covered.rows(); ++i) {
    for (std::size_t j = i + 1; j < covered.cols(); ++j) {
      covered_pairs += covered(i, j) > 0 ? 1 : 0;
    }
  }
  return {{"scales", scales.to_json()},
          {"refined_points", points.size()},
          {"covered_pairs", covered_pairs},
          {"charts", charts_json},
          {"warnings", warnings}};
}

namespace {

struct ChartState {
  std::size_t p = 0;
  std::vector<std::size_t> X;
  std::vector<RefinedPoint> Y;
  std::vector<std::size_t> basis_local;
  std::vector<RefinedPoint> basis_points;
  std::unique_ptr<ChartFrame> frame;
  DenseTable<double> F;
  ChartDiagnostics diag;
};

}  // namespace

RefinementResult refine(const CoarseNet& net, const RefinementScales& scales, const RefineOptions& options) {
  RefinementResult result;
  result.scales = scales;
  if (!scales.gate_ok()) {
    result.warnings.push_back("delta_hat / r_hat = " + csv::format_double(scales.delta_hat / scales.r_hat) +
                              " is not below 1/150");
  }
  std::vector<std::size_t> charts = options.charts;
  if (charts.empty()) {
    charts.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
      charts[i] = i;
    }
  }
  const std::size_t n = static_cast<std::size_t>(scales.n);
  const DenseTable<double> sigma = simplex_grid(scales.n, scales.eps_prime, options.max_grid);

  std::vector<ChartState> state(charts.size());
  parallel_for(charts.size(), options.threads, [&](std::size_t c) {
    ChartState& s = state[c];
    s.p = charts[c];
    s.diag.chart = s.p;
    s.X = neighbor_set(net, scales, s.p);
    s.diag.neighbors = s.X.size();
    std::vector<RefinedPoint> Y = chart_points(s.p, s.X, sigma, options.budget, options.seed, &s.diag.subsampled);
    s.diag.generated = Y.size();

    const StagedQ pp = squared_distance_Q(net, scales, s.p, s.X, Y, s.p, s.X, Y);
    const std::size_t pos_p = static_cast<std::size_t>(std::find(s.X.begin(), s.X.end(), s.p) - s.X.begin());
    ChartFrame frame = frame_from_self_staging(pp, pos_p);
    std::vector<std::size_t> all(Y.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      all[i] = i;
    }
    BasisResult basis;
    try {
      basis = find_basis(frame, all, scales, options.C1, s.p);
    } catch (const BasisFailure& e) {
      s.diag.failure = e.what();
      s.Y = std::move(Y);
      s.diag.kept = s.Y.size();
      return;
    }
    s.diag.basis_residual = basis.residual;
    const DenseTable<double> F = chart_map_F(frame, basis.basis, scales, all);

    // Basis points first, then the rest in generation order, dropping near-duplicates in F.
    std::vector<std::size_t> order = basis.basis;
    for (std::size_t i = 0; i < Y.size(); ++i) {
      if (std::find(basis.basis.begin(), basis.basis.end(), i) == basis.basis.end()) {
        order.push_back(i);
      }
    }
    const double tol2 = 0.25 * scales.delta_hat * scales.delta_hat;
    std::vector<std::size_t> kept(basis.basis);
    for (std::size_t i : std::span(order).subspan(n)) {
      bool duplicate = false;
      if (options.dedupe) {
        for (std::size_t k : kept) {
          double d2 = 0.0;
          for (std::size_t a = 0; a < n; ++a) {
            const double diff = F(i, a) - F(k, a);
            d2 += diff * diff;
          }
          if (d2 < tol2) {
            duplicate = true;
            break;
          }
        }
      }
      if (!duplicate) {
        kept.push_back(i);
      }
    }

    ChartFrame kept_frame(kept.size());
    for (std::size_t a = 0; a < kept.size(); ++a) {
      kept_frame.set_base(a, frame.base(kept[a]));
      for (std::size_t b = a; b < kept.size(); ++b) {
        kept_frame.set(a, b, frame.Q(kept[a], kept[b]));
      }
    }
    s.F = DenseTable<double>(kept.size(), n);
    for (std::size_t a = 0; a < kept.size(); ++a) {
      s.Y.push_back(Y[kept[a]]);
      for (std::size_t d = 0; d < n; ++d) {
        s.F(a, d) = F(kept[a], d);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      s.basis_local.push_back(i);
      s.basis_points.push_back(s.Y[i]);
    }
    s.frame = std::make_unique<ChartFrame>(std::move(kept_frame));
    s.diag.kept = s.Y.size();
  });

  result.chart_offsets.push_back(0);
  for (auto& s : state) {
    if (s.diag.subsampled) {
      result.warnings.push_back("chart " + std::to_string(s.p) + ": index set subsampled to " +
                                std::to_string(options.budget) + " draws");
    }
    if (!s.diag.failure.empty()) {
      result.warnings.push_back(s.diag.failure);
    }
    result.points.insert(result.points.end(), s.Y.begin(), s.Y.end());
    result.chart_offsets.push_back(result.points.size());
  }
  const std::size_t total = result.points.size();
  result.coordinates = DenseTable<double>(total, n, kUnset);
  for (std::size_t c = 0; c < state.size(); ++c) {
    if (state[c].frame) {
      for (std::size_t a = 0; a < state[c].Y.size(); ++a) {
        for (std::size_t d = 0; d < n; ++d) {
          result.coordinates(result.chart_offsets[c] + a, d) = state[c].F(a, d);
        }
      }
    }
  }

  // frame_value(x, y): |F(x) - F(y)| computed in the chart that owns x.
  DenseTable<double> frame_value(total, total, kUnset);
  parallel_for(state.size(), options.threads, [&](std::size_t c) {
    ChartState& s = state[c];
    if (!s.frame) {
      return;
    }
    const std::size_t off_p = result.chart_offsets[c];
    const std::size_t pos_p = static_cast<std::size_t>(std::find(s.X.begin(), s.X.end(), s.p) - s.X.begin());
    for (std::size_t d = 0; d < state.size(); ++d) {
      const ChartState& t = state[d];
      if (!(net(s.p, t.p) < scales.admissible_radius())) {
        continue;
      }
      ++s.diag.partners;
      const std::size_t off_q = result.chart_offsets[d];
      DenseTable<double> Fq;
      if (d == c) {
        Fq = s.F;
      } else {
        const StagedQ pq = squared_distance_Q(net, scales, s.p, s.X, s.basis_points, t.p, t.X, t.Y);
        ChartFrame frame(n + t.Y.size());
        for (std::size_t i = 0; i < n; ++i) {
          frame.set_base(i, s.frame->base(i));
          for (std::size_t k = i; k < n; ++k) {
            frame.set(i, k, s.frame->Q(i, k));
          }
          for (std::size_t y = 0; y < t.Y.size(); ++y) {
            frame.set(i, n + y, pq.yy(i, y));
          }
        }
        std::vector<std::size_t> targets(t.Y.size());
        for (std::size_t y = 0; y < t.Y.size(); ++y) {
          frame.set_base(n + y, pq.xy(pos_p, y));
          targets[y] = n + y;
        }
        Fq = chart_map_F(frame, s.basis_local, scales, targets);
      }
      for (std::size_t a = 0; a < s.Y.size(); ++a) {
        for (std::size_t b = 0; b < t.Y.size(); ++b) {
          double d2 = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            const double diff = s.F(a, k) - Fq(b, k);
            d2 += diff * diff;
          }
          frame_value(off_p + a, off_q + b) = std::sqrt(d2);
        }
      }
    }
  });
  for (std::size_t c = 0; c < state.size(); ++c) {
    result.charts.push_back(state[c].diag);
  }

  // Reconcile: median of the candidates from the charts owning x and y.
  std::vector<std::size_t> owner(total);
  for (std::size_t c = 0; c + 1 < result.chart_offsets.size(); ++c) {
    for (std::size_t i = result.chart_offsets[c]; i < result.chart_offsets[c + 1]; ++i) {
      owner[i] = c;
    }
  }
  result.dprime = DenseTable<double>(total, total, scales.r_hat);
  result.covered = DenseTable<std::uint8_t>(total, total, 0);
  std::vector<double> candidates;
  for (std::size_t i = 0; i < total; ++i) {
    result.dprime(i, i) = 0.0;
    for (std::size_t j = i + 1; j < total; ++j) {
      candidates.clear();
      if (!std::isnan(frame_value(i, j))) {
        candidates.push_back(frame_value(i, j));
      }
      if (owner[i] != owner[j] && !std::isnan(frame_value(j, i))) {
        candidates.push_back(frame_value(j, i));
      }
      if (candidates.empty()) {
        continue;
      }
      std::sort(candidates.begin(), candidates.end());
      const std::size_t m = candidates.size();
      const double median = m % 2 == 1 ? candidates[m / 2] : 0.5 * (candidates[m / 2 - 1] + candidates[m / 2]);
      result.dprime(i, j) = result.dprime(j, i) = median;
      result.covered(i, j) = result.covered(j, i) = static_cast<std::uint8_t>(m);
    }
  }
  return result;
}

}  // namespace geonet
