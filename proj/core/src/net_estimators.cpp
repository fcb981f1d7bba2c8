#include "geonet/net_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "geonet/csv.hpp"
#include "geonet/errors.hpp"
#include "geonet/parallel.hpp"

namespace geonet {
namespace {

double smoothstep5(double u) noexcept {
  return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

std::size_t floor_count(double x, const char* name) {
  if (!std::isfinite(x) || x < 0.0 || x > 1e15) {
    throw ParameterError(std::string(name) + " is not a representable count");
  }
  return static_cast<std::size_t>(std::floor(x));
}

}  // namespace

void NetSplit::validate() const {
  if (N0 < 1 || N1 < N0 || N2 < N1) {
    throw ParameterError("net sizes must satisfy N2 >= N1 >= N0 >= 1 (got " + std::to_string(N0) + ", " +
                         std::to_string(N1) + ", " + std::to_string(N2) + ")");
  }
}

void NetSplit::validate_against(const ObservedDistances& obs) const {
  validate();
  if (total() > obs.size()) {
    throw InputError("net split needs " + std::to_string(total()) + " points but the table has " +
                     std::to_string(obs.size()));
  }
  if (obs.row_limit() < begin2()) {
    throw InputError("observation table does not store the rows of the first two nets");
  }
}

NetSplit sample_sizes(int n, double eps1, double delta1, double theta, const SizeConstants& constants,
                      double diameter) {
  if (!(theta > 0.0 && theta < 0.5)) {
    throw ParameterError("theta must lie in (0, 1/2)");
  }
  if (!(delta1 > 0.0 && delta1 < diameter / 2.0)) {
    throw ParameterError("delta1 must lie in (0, D/2)");
  }
  if (!(eps1 > 0.0 && eps1 < 1.0)) {
    throw ParameterError("eps1 must lie in (0, 1)");
  }
  if (n < 1 || constants.C3 <= 0.0 || constants.C10 <= 0.0 || constants.C15 <= 0.0) {
    throw ParameterError("dimension and size constants must be positive");
  }
  const double ld = std::log(1.0 / delta1);
  const double lt = std::log(1.0 / theta);
  const double le = std::log(1.0 / eps1);
  NetSplit s;
  s.N0 = floor_count(2.0 * constants.C3 * std::pow(delta1, -n) * (ld + lt), "N0");
  s.N1 = floor_count(constants.C10 * std::pow(eps1, -2.0 * n) * (ld + lt), "N1");
  s.N2 = floor_count(constants.C15 * std::pow(eps1, -2.0 * n) * (lt * lt + ld * ld + std::pow(le, 8)), "N2");
  return s;
}

double psi1(double t) noexcept {
  const double a = std::abs(t);
  if (a <= 1.0) {
    return 1.0;
  }
  if (a >= 2.0) {
    return 0.0;
  }
  return smoothstep5(2.0 - a);
}

double psi_rho(double t, double rho) noexcept {
  return psi1(t / (rho * rho));
}

double beta1(double t) noexcept {
  return 1.0 - psi1(t);
}

nlohmann::json ParameterLedger::to_json() const {
  return {{"n", n},
          {"D", D},
          {"sigma", sigma},
          {"beta", beta},
          {"r0", r0},
          {"r1", r1},
          {"phi1", phi1},
          {"c3_hat", c3_hat},
          {"c3", c3},
          {"c4", c4},
          {"c4_hat", c4_hat},
          {"c5", c5},
          {"b", b},
          {"rho", rho},
          {"rho_rule", rho_rule == RhoRule::kCascade ? "cascade" : "matched_accuracy"},
          {"u0", u0},
          {"u1", u1},
          {"u2", u2},
          {"eps1", eps1},
          {"eps1_cap", eps1_cap},
          {"h0", h0},
          {"eps2", eps2},
          {"eps3", eps3},
          {"L", L},
          {"eps_L", eps_L},
          {"theta", theta},
          {"delta1", delta1},
          {"delta", delta},
          {"near_pair_bound", near_pair_bound()},
          {"warnings", warnings}};
}

double truncation_error(double L, double D, double beta) noexcept {
  return beta * std::exp(-(std::sqrt(L) - D) / 2.0) * (D * D + 6.0 * beta * beta);
}

ParameterLedger derive_parameters(const GeometryBounds& bounds, const MaskSpec& mask, const NoiseSpec& noise,
                                  const ParameterInputs& in) {
  mask.validate();
  ParameterLedger g;
  try {
    g.beta = beta_of(noise);
  } catch (const UnsupportedNoiseError& e) {
    throw ParameterError(e.what());
  }
  if (!std::isfinite(g.beta)) {
    throw ParameterError("noise exponential moment beta is not finite");
  }
  if (!(in.c5 > 0.0 && in.c5 <= 1.0)) {
    throw ParameterError("c5 must lie in (0, 1]");
  }
  if (!(in.eps1 > 0.0)) {
    throw ParameterError("eps1 must be positive");
  }
  g.n = bounds.n;
  g.D = bounds.D;
  g.sigma = noise.sigma();
  g.c5 = in.c5;
  g.eps1 = in.eps1;
  g.theta = in.theta;
  g.delta1 = in.delta1;
  g.delta = in.delta;
  g.rho_rule = in.rho_rule;

  const double H = mask.effective_H();
  const double curvature_term =
      bounds.Lambda > 0.0 ? std::numbers::pi / (2.0 * bounds.Lambda) : std::numeric_limits<double>::infinity();
  const double mask_term = H > 0.0 ? mask.phi0 / (2.0 * H) : std::numeric_limits<double>::infinity();
  g.r0 = std::min({mask_term, bounds.i0, curvature_term});
  if (!(g.r0 > 0.0)) {
    throw ParameterError("r0 is not positive; the mask never observes anything");
  }
  g.r1 = g.r0 / 2.0;
  g.phi1 = mask.c1 * mask.phi0 / 2.0;
  g.c3_hat = unit_ball_volume(bounds.n) / bounds.V0;
  g.c3 = bounds.rho_min / bounds.rho_max * g.c3_hat;
  g.c4 = g.c3 * g.phi1 * g.phi1 * std::pow(g.r1, bounds.n);
  g.c4_hat = 0.25 * std::min(mask.c2 * H * g.r1, g.c4);
  g.b = g.c4 / 2.0;

  g.eps1_cap = std::min(1.0, 8.0 * g.c5 * std::pow(g.phi1 * g.c3, -1.0 / bounds.n));
  if (g.eps1 > g.eps1_cap) {
    throw ParameterError("eps1 = " + csv::format_double(g.eps1) + " exceeds its cap " +
                         csv::format_double(g.eps1_cap));
  }

  g.rho = in.rho_rule == RhoRule::kCascade ? 2.0 * g.eps1 / g.c5 : g.c5 * g.eps1 / 4.0;
  if (g.rho > g.r1) {
    const std::string msg =
        "rho = " + csv::format_double(g.rho) + " exceeds r1 = " + csv::format_double(g.r1);
    if (!in.allow_rho_above_r1) {
      throw ParameterError(msg);
    }
    g.warnings.push_back(msg);
  }
  g.h0 = g.eps1 / 2.0;
  g.eps2 = g.rho * g.rho / 200.0;
  g.u0 = g.phi1 * g.c3 * std::pow(g.rho / 4.0, bounds.n);
  g.u1 = g.u0 / 2.0;
  g.u2 = g.u0 / 4.0;
  g.eps3 = g.b * g.u1 / 4.0;

  const double D = g.D;
  const double beta = g.beta;
  const double log_arg = std::exp(D / 2.0) * 200.0 * beta * (D * D + 6.0 * beta * beta) / (g.rho * g.rho);
  const double log_value = std::log(log_arg);
  g.L = 4.0 * log_value * log_value;
  g.eps_L = truncation_error(g.L, D, beta);

  if (!(g.eps3 < g.c4 / 4.0)) {
    throw ParameterError("eps3 must stay below c4 / 4");
  }
  if (g.eps2 + g.eps_L > g.rho * g.rho / 100.0 * (1.0 + 1e-9)) {
    throw ParameterError("eps2 + eps(L) exceeds rho^2 / 100");
  }
  if (!(g.L > 2.0 * std::max(D * D, g.sigma))) {
    g.warnings.push_back("L does not exceed 2 max(D^2, sigma)");
  }
  return g;
}

WitnessSums witness_sums(std::span<const double> a, std::span<const std::uint8_t> fa, std::span<const double> b,
                         std::span<const std::uint8_t> fb, double L) noexcept {
  const std::size_t m = a.size();
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::uint32_t cnt[4] = {0, 0, 0, 0};
  std::size_t l = 0;
  for (; l + 4 <= m; l += 4) {
    for (int u = 0; u < 4; ++u) {
      const unsigned both = fa[l + u] & fb[l + u];
      const double d = a[l + u] - b[l + u];
      acc[u] += static_cast<double>(both) * std::min(d * d, L);
      cnt[u] += both;
    }
  }
  for (; l < m; ++l) {
    const unsigned both = fa[l] & fb[l];
    const double d = a[l] - b[l];
    acc[0] += static_cast<double>(both) * std::min(d * d, L);
    cnt[0] += both;
  }
  return {(acc[0] + acc[1]) + (acc[2] + acc[3]), cnt[0] + cnt[1] + cnt[2] + cnt[3]};
}

namespace {

// Fills T and/or K^L in a single sweep over the dense net.
void sweep_witnesses(const ObservedDistances& obs, const NetSplit& split, double sigma, double L, unsigned threads,
                     DenseTable<std::uint32_t>* T, DenseTable<double>* KL) {
  split.validate_against(obs);
  const std::size_t b2 = split.begin2();
  const std::size_t e2 = split.total();
  const double inv_n2 = 1.0 / static_cast<double>(split.N2);
  const double bias = 2.0 * sigma * sigma;
  parallel_for(split.N0, threads, [&](std::size_t j) {
    const auto vj = obs.row_values(j, b2, e2);
    const auto fj = obs.row_flags(j, b2, e2);
    for (std::size_t c = 0; c < split.N1; ++c) {
      const std::size_t k = split.N0 + c;
      const WitnessSums s = witness_sums(vj, fj, obs.row_values(k, b2, e2), obs.row_flags(k, b2, e2), L);
      if (T != nullptr) {
        (*T)(j, c) = s.count;
      }
      if (KL != nullptr) {
        (*KL)(j, c) = (s.sum_sq - bias * static_cast<double>(s.count)) * inv_n2;
      }
    }
  });
}

}  // namespace

DenseTable<std::uint32_t> compute_T(const ObservedDistances& obs, const NetSplit& split, unsigned threads) {
  DenseTable<std::uint32_t> T(split.N0, split.N1, 0);
  sweep_witnesses(obs, split, 0.0, std::numeric_limits<double>::infinity(), threads, &T, nullptr);
  return T;
}

DenseTable<double> compute_KL(const ObservedDistances& obs, const NetSplit& split, double sigma, double L,
                              unsigned threads) {
  DenseTable<double> KL(split.N0, split.N1, 0.0);
  sweep_witnesses(obs, split, sigma, L, threads, nullptr, &KL);
  return KL;
}

DenseTable<double> neighbor_weights(const DenseTable<std::uint32_t>& T, const DenseTable<double>& KL,
                                    const NetSplit& split, const ParameterLedger& ledger) {
  DenseTable<double> w(T.rows(), T.cols(), 0.0);
  const double scale = 1.0 / (ledger.b * static_cast<double>(split.N2));
  for (std::size_t j = 0; j < T.rows(); ++j) {
    for (std::size_t c = 0; c < T.cols(); ++c) {
      const double reliability = beta1(static_cast<double>(T(j, c)) * scale);
      w(j, c) = reliability == 0.0 ? 0.0 : reliability * psi_rho(KL(j, c), ledger.rho);
    }
  }
  return w;
}

namespace {

VWQ weighted_averages(const ObservedDistances& obs, const NetSplit& split, const DenseTable<double>& weights,
                      double D, unsigned threads) {
  split.validate_against(obs);
  const std::size_t N0 = split.N0;
  const std::size_t b1 = split.begin1();
  const std::size_t e1 = split.begin2();
  const double inv_n1 = 1.0 / static_cast<double>(split.N1);
  VWQ out{DenseTable<double>(N0, N0, 0.0), DenseTable<double>(N0, N0, 0.0), DenseTable<double>(N0, N0, D)};
  parallel_for(N0, threads, [&](std::size_t j) {
    const auto w = weights.row(j);
    for (std::size_t jp = 0; jp < N0; ++jp) {
      const auto values = obs.row_values(jp, b1, e1);
      const auto flags = obs.row_flags(jp, b1, e1);
      double v = 0.0;
      double s = 0.0;
      for (std::size_t c = 0; c < split.N1; ++c) {
        const double wk = w[c] * static_cast<double>(flags[c]);
        s += wk;
        v += wk * values[c];
      }
      out.V(j, jp) = v * inv_n1;
      out.W(j, jp) = s * inv_n1;
      out.Q(j, jp) = s == 0.0 ? D : v / s;
    }
  });
  return out;
}

}  // namespace

VWQ compute_VWQ(const ObservedDistances& obs, const NetSplit& split, const DenseTable<std::uint32_t>& T,
                const DenseTable<double>& KL, const ParameterLedger& ledger, unsigned threads) {
  if (T.rows() != split.N0 || T.cols() != split.N1 || KL.rows() != split.N0 || KL.cols() != split.N1) {
    throw InputError("T and K^L tables do not match the net split");
  }
  return weighted_averages(obs, split, neighbor_weights(T, KL, split, ledger), ledger.D, threads);
}

QDecomposition decompose_q(const ObservedDistances& obs, const NetSplit& split, const DenseTable<double>& weights,
                           const VWQ& vwq, double D, const TruthFn& truth) {
  const std::size_t N0 = split.N0;
  QDecomposition out{DenseTable<double>(N0, N0, D), DenseTable<double>(N0, N0, 0.0)};
  for (std::size_t jp = 0; jp < N0; ++jp) {
    std::vector<double> d(split.N1);
    for (std::size_t c = 0; c < split.N1; ++c) {
      d[c] = truth(split.N0 + c, jp);
    }
    const auto flags = obs.row_flags(jp, split.begin1(), split.begin2());
    for (std::size_t j = 0; j < N0; ++j) {
      double v1 = 0.0;
      double s = 0.0;
      for (std::size_t c = 0; c < split.N1; ++c) {
        const double wk = weights(j, c) * static_cast<double>(flags[c]);
        s += wk;
        v1 += wk * d[c];
      }
      if (s != 0.0) {
        out.Q1(j, jp) = v1 / s;
        out.Q2(j, jp) = vwq.Q(j, jp) - out.Q1(j, jp);
      }
    }
  }
  return out;
}

ApproxDistances approx_distances(const DenseTable<double>& Q, const DenseTable<double>& W, double u2, double D) {
  const std::size_t N0 = Q.rows();
  ApproxDistances out{DenseTable<double>(N0, N0, 0.0), DenseTable<std::uint8_t>(N0, N0, 0)};
  for (std::size_t j = 0; j < N0; ++j) {
    out.passed(j, j) = static_cast<std::uint8_t>((W(j, j) > u2 ? 1 : 0) * 2);
    for (std::size_t jp = j + 1; jp < N0; ++jp) {
      const bool a = W(j, jp) > u2;
      const bool b = W(jp, j) > u2;
      double value = D;
      if (a && b) {
        value = 0.5 * (Q(j, jp) + Q(jp, j));
      } else if (a) {
        value = Q(j, jp);
      } else if (b) {
        value = Q(jp, j);
      }
      value = std::clamp(value, 0.0, D);
      out.dapp(j, jp) = value;
      out.dapp(jp, j) = value;
      const auto count = static_cast<std::uint8_t>(static_cast<int>(a) + static_cast<int>(b));
      out.passed(j, jp) = count;
      out.passed(jp, j) = count;
    }
  }
  return out;
}

EstimatorTable run_pipeline(const ObservedDistances& obs, const NetSplit& split, const ParameterLedger& ledger,
                            const PipelineOptions& options) {
  EstimatorTable e;
  e.split = split;
  e.T = DenseTable<std::uint32_t>(split.N0, split.N1, 0);
  e.KL = DenseTable<double>(split.N0, split.N1, 0.0);
  sweep_witnesses(obs, split, ledger.sigma, ledger.L, options.threads, &e.T, &e.KL);
  e.weights = neighbor_weights(e.T, e.KL, split, ledger);
  VWQ vwq = weighted_averages(obs, split, e.weights, ledger.D, options.threads);
  ApproxDistances app = approx_distances(vwq.Q, vwq.W, ledger.u2, ledger.D);
  e.V = std::move(vwq.V);
  e.W = std::move(vwq.W);
  e.Q = std::move(vwq.Q);
  e.dapp = std::move(app.dapp);
  e.passed = std::move(app.passed);
  return e;
}

void save_pair_table(const std::filesystem::path& path, const DenseTable<double>& values,
                     const DenseTable<std::uint8_t>& flags, const std::string& value_name,
                     const std::string& flag_name) {
  std::ofstream out = csv::open_output(path);
  out << "i,j," << value_name << ',' << flag_name << '\n';
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t j = i + 1; j < values.cols(); ++j) {
      out << i << ',' << j << ',' << csv::format_double(values(i, j)) << ',' << static_cast<int>(flags(i, j))
          << '\n';
    }
  }
}

std::pair<DenseTable<double>, DenseTable<std::uint8_t>> load_pair_table(const std::filesystem::path& path) {
  struct Row {
    std::size_t i, j;
    double value;
    int flag;
  };
  std::vector<Row> rows;
  std::size_t n = 0;
  std::ifstream in = csv::open_input(path);
  csv::LineReader reader(in);
  std::string line;
  if (!reader.next(line) || csv::split(line).size() != 4) {
    throw ParseError("pair table header must have four columns", 1);
  }
  while (reader.next(line)) {
    if (line.empty()) {
      continue;
    }
    const std::size_t ln = reader.line_number();
    const auto f = csv::split(line);
    if (f.size() != 4) {
      throw ParseError("expected 4 fields", ln);
    }
    Row r{csv::parse_index(f[0], ln), csv::parse_index(f[1], ln), csv::parse_double(f[2], ln),
          static_cast<int>(csv::parse_index(f[3], ln))};
    if (r.i >= r.j) {
      throw ParseError("pair rows need i < j", ln);
    }
    n = std::max(n, r.j + 1);
    rows.push_back(r);
  }
  if (rows.size() != n * (n - (n > 0 ? 1 : 0)) / 2) {
    throw ParseError("pair table does not list every pair exactly once");
  }
  DenseTable<double> values(n, n, 0.0);
  DenseTable<std::uint8_t> flags(n, n, 0);
  for (const Row& r : rows) {
    values(r.i, r.j) = values(r.j, r.i) = r.value;
    flags(r.i, r.j) = flags(r.j, r.i) = static_cast<std::uint8_t>(r.flag);
  }
  return {std::move(values), std::move(flags)};
}

}  // namespace geonet
