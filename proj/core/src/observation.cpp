#include "geonet/observation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "geonet/csv.hpp"
#include "geonet/errors.hpp"
#include "geonet/parallel.hpp"

namespace geonet {
namespace {

double smoothstep5(double u) noexcept {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

double smoothstep5_slope(double u) noexcept {
  if (u <= 0.0 || u >= 1.0) {
    return 0.0;
  }
  const double v = u * (1.0 - u);
  return 30.0 * v * v;
}

// Zero-mean function with values in [-1, 1] used by the anisotropy hook.
double anisotropy_profile(const ManifoldModel& model, PointView p) noexcept {
  if (model.kind() == ModelKind::kSphere) {
    return p.back() / model.radius();
  }
  return std::cos(2.0 * std::numbers::pi * p[0] / model.periods()[0]);
}

const char* family_name(NoiseSpec::Family f) {
  switch (f) {
    case NoiseSpec::Family::kGaussian:
      return "gaussian";
    case NoiseSpec::Family::kLaplace:
      return "laplace";
    default:
      return "none";
  }
}

const char* profile_name(MaskSpec::Profile p) {
  switch (p) {
    case MaskSpec::Profile::kExponential:
      return "exponential";
    case MaskSpec::Profile::kSmoothCutoff:
      return "smooth_cutoff";
    default:
      return "constant";
  }
}

}  // namespace

double NoiseSpec::sigma() const noexcept {
  switch (family) {
    case Family::kGaussian:
      return scale;
    case Family::kLaplace:
      return scale * std::numbers::sqrt2;
    default:
      return 0.0;
  }
}

double NoiseSpec::draw(CounterStream& stream) const noexcept {
  switch (family) {
    case Family::kGaussian:
      return scale * stream.normal();
    case Family::kLaplace: {
      const double u = stream.uniform_open() - 0.5;
      const double magnitude = -scale * std::log1p(-2.0 * std::abs(u));
      return u < 0.0 ? -magnitude : magnitude;
    }
    default:
      return 0.0;
  }
}

void NoiseSpec::validate() const {
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw ConfigError("noise scale must be finite and non-negative");
  }
}

nlohmann::json NoiseSpec::to_json() const {
  nlohmann::json j = {{"family", family_name(family)}};
  if (family == Family::kGaussian) {
    j["sigma"] = scale;
  } else if (family == Family::kLaplace) {
    j["scale"] = scale;
  }
  return j;
}

NoiseSpec NoiseSpec::from_json(const nlohmann::json& j) {
  try {
    const std::string family = j.at("family").get<std::string>();
    NoiseSpec spec;
    if (family == "none") {
      spec = none();
    } else if (family == "gaussian") {
      spec = gaussian(j.at("sigma").get<double>());
    } else if (family == "laplace") {
      spec = laplace(j.at("scale").get<double>());
    } else {
      throw ConfigError("unknown noise family '" + family + "'");
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid noise description: ") + e.what());
  }
}

double beta_of(const NoiseSpec& noise) {
  noise.validate();
  switch (noise.family) {
    case NoiseSpec::Family::kGaussian: {
      const double s = noise.scale;
      const double cdf = 0.5 * std::erfc(-s / std::numbers::sqrt2);
      return 2.0 * std::exp(0.5 * s * s) * cdf;
    }
    case NoiseSpec::Family::kLaplace:
      if (noise.scale >= 1.0) {
        throw UnsupportedNoiseError("laplace noise with scale >= 1 has no finite E exp(|eta|)");
      }
      return 1.0 / (1.0 - noise.scale);
    default:
      return 1.0;
  }
}

MaskSpec MaskSpec::constant(double phi0) {
  MaskSpec m;
  m.profile = Profile::kConstant;
  m.phi0 = phi0;
  return m;
}

MaskSpec MaskSpec::exponential(double phi0, double decay_length) {
  MaskSpec m;
  m.profile = Profile::kExponential;
  m.phi0 = phi0;
  m.length = decay_length;
  return m;
}

MaskSpec MaskSpec::smooth_cutoff(double phi0, double range) {
  MaskSpec m;
  m.profile = Profile::kSmoothCutoff;
  m.phi0 = phi0;
  m.length = range;
  return m;
}

double MaskSpec::phi1(double s) const noexcept {
  switch (profile) {
    case Profile::kExponential:
      return phi0 * std::exp(-s / length);
    case Profile::kSmoothCutoff:
      return phi0 * smoothstep5((length - s) / length);
    default:
      return phi0;
  }
}

double MaskSpec::phi1_slope(double s) const noexcept {
  switch (profile) {
    case Profile::kExponential:
      return -phi0 / length * std::exp(-s / length);
    case Profile::kSmoothCutoff:
      return -phi0 / length * smoothstep5_slope((length - s) / length);
    default:
      return 0.0;
  }
}

double MaskSpec::max_slope() const noexcept {
  switch (profile) {
    case Profile::kExponential:
      return phi0 / length;
    case Profile::kSmoothCutoff:
      return phi0 * (15.0 / 8.0) / length;
    default:
      return 0.0;
  }
}

double MaskSpec::effective_H() const noexcept {
  return H > 0.0 ? H : std::max(phi0, max_slope());
}

double MaskSpec::multiplier(const ManifoldModel& model, PointView x, PointView y) const noexcept {
  if (anisotropy == 0.0) {
    return 1.0;
  }
  return 1.0 + anisotropy * 0.5 * (anisotropy_profile(model, x) + anisotropy_profile(model, y));
}

double MaskSpec::phi(const ManifoldModel& model, PointView x, PointView y) const noexcept {
  return phi(model, x, y, model.distance(x, y));
}

double MaskSpec::phi(const ManifoldModel& model, PointView x, PointView y, double distance) const noexcept {
  return std::min(1.0, multiplier(model, x, y) * phi1(distance));
}

void MaskSpec::validate() const {
  if (!(phi0 >= 0.0 && phi0 <= 1.0)) {
    throw ConfigError("mask phi0 must lie in [0, 1]");
  }
  if (profile != Profile::kConstant && !(length > 0.0 && std::isfinite(length))) {
    throw ConfigError("mask length must be positive and finite");
  }
  if (!(c1 > 0.0 && c1 <= 1.0) || !(c2 >= 1.0 && std::isfinite(c2))) {
    throw ConfigError("mask multipliers must satisfy 0 < c1 <= 1 <= c2");
  }
  if (!(std::abs(anisotropy) < 1.0)) {
    throw ConfigError("mask anisotropy must satisfy |a| < 1");
  }
  const double a = std::abs(anisotropy);
  if (c1 > 1.0 - a + 1e-15 || c2 < 1.0 + a - 1e-15) {
    throw ConfigError("mask anisotropy requires c1 <= 1 - |a| and c2 >= 1 + |a|");
  }
  if (H < 0.0 || (H > 0.0 && H < std::max(phi0, max_slope()) * (1.0 - 1e-12))) {
    throw ConfigError("mask H is below the C1 norm of Phi1");
  }
}

nlohmann::json MaskSpec::to_json() const {
  nlohmann::json j = {{"profile", profile_name(profile)}, {"phi0", phi0}};
  if (profile == Profile::kExponential) {
    j["decay_length"] = length;
  } else if (profile == Profile::kSmoothCutoff) {
    j["range"] = length;
  }
  j["c1"] = c1;
  j["c2"] = c2;
  j["anisotropy"] = anisotropy;
  j["H"] = H;
  return j;
}

MaskSpec MaskSpec::from_json(const nlohmann::json& j) {
  try {
    const std::string profile = j.at("profile").get<std::string>();
    MaskSpec m;
    if (profile == "constant") {
      m = constant(j.value("phi0", 1.0));
    } else if (profile == "exponential") {
      m = exponential(j.value("phi0", 1.0), j.at("decay_length").get<double>());
    } else if (profile == "smooth_cutoff") {
      m = smooth_cutoff(j.value("phi0", 1.0), j.at("range").get<double>());
    } else {
      throw ConfigError("unknown mask profile '" + profile + "'");
    }
    m.c1 = j.value("c1", 1.0);
    m.c2 = j.value("c2", 1.0);
    m.anisotropy = j.value("anisotropy", 0.0);
    m.H = j.value("H", 0.0);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid mask description: ") + e.what());
  }
}

ObservedDistances::ObservedDistances(std::size_t N, std::size_t row_limit)
    : n_(N), row_limit_(std::min(row_limit, N)) {
  const std::size_t count = row_limit_ == 0 ? 0 : row_offset(row_limit_ - 1) + (n_ - row_limit_);
  values_.assign(count, 0.0);
  flags_.assign(count, 0);
}

bool ObservedDistances::stored(std::size_t j, std::size_t k) const noexcept {
  return j != k && j < n_ && k < n_ && std::min(j, k) < row_limit_;
}

std::size_t ObservedDistances::slot(std::size_t j, std::size_t k) const {
  if (j == k || j >= n_ || k >= n_) {
    throw InputError("pair (" + std::to_string(j) + ", " + std::to_string(k) + ") is not a valid pair of " +
                     std::to_string(n_) + " points");
  }
  if (j > k) {
    std::swap(j, k);
  }
  if (j >= row_limit_) {
    throw InputError("pair (" + std::to_string(j) + ", " + std::to_string(k) + ") lies outside the stored rows");
  }
  return row_offset(j) + (k - j - 1);
}

bool ObservedDistances::observed(std::size_t j, std::size_t k) const {
  return flags_[slot(j, k)] != 0;
}

double ObservedDistances::value(std::size_t j, std::size_t k) const {
  const std::size_t s = slot(j, k);
  if (flags_[s] == 0) {
    throw MaskedReadError("pair (" + std::to_string(j) + ", " + std::to_string(k) + ") is masked");
  }
  return values_[s];
}

void ObservedDistances::set(std::size_t j, std::size_t k, double value, bool observed) {
  const std::size_t s = slot(j, k);
  values_[s] = observed ? value : 0.0;
  flags_[s] = observed ? 1 : 0;
}

std::span<const double> ObservedDistances::row_values(std::size_t j, std::size_t begin, std::size_t end) const {
  if (begin <= j || end > n_ || begin > end || j >= row_limit_) {
    throw InputError("row range outside the stored upper triangle");
  }
  return {values_.data() + row_offset(j) + (begin - j - 1), end - begin};
}

std::span<const std::uint8_t> ObservedDistances::row_flags(std::size_t j, std::size_t begin, std::size_t end) const {
  if (begin <= j || end > n_ || begin > end || j >= row_limit_) {
    throw InputError("row range outside the stored upper triangle");
  }
  return {flags_.data() + row_offset(j) + (begin - j - 1), end - begin};
}

std::size_t ObservedDistances::observed_count() const noexcept {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

ObservedDistances generate_observations(const ManifoldModel& model, const SampleSet& samples,
                                        const NoiseSpec& noise, const MaskSpec& mask, std::uint64_t seed,
                                        const GenerateOptions& options) {
  if (!(samples.model() == model)) {
    throw InputError("sample set was drawn from a different model");
  }
  noise.validate();
  mask.validate();
  const std::size_t N = samples.size();
  const std::size_t rows = options.row_limit == 0 ? N : std::min(options.row_limit, N);
  ObservedDistances obs(N, rows);
  parallel_for(rows, options.threads, [&](std::size_t j) {
    const PointView xj = samples.point(j);
    for (std::size_t k = j + 1; k < N; ++k) {
      const PointView xk = samples.point(k);
      const double d = model.distance(xj, xk);
      CounterStream mask_stream(seed, StreamTag::kMask, j, k);
      const bool seen = mask_stream.uniform() < mask.phi(model, xj, xk, d);
      double value = 0.0;
      if (seen) {
        CounterStream noise_stream(seed, StreamTag::kNoise, j, k);
        value = d + noise.draw(noise_stream);
      }
      obs.set(j, k, value, seen);
    }
  });
  obs.metadata() = {{"N", N},
                    {"row_limit", rows},
                    {"noise", noise.to_json()},
                    {"sigma", noise.sigma()},
                    {"mask", mask.to_json()},
                    {"seed", seed}};
  return obs;
}

void save_observations(const ObservedDistances& obs, const std::filesystem::path& path) {
  std::ofstream out = csv::open_output(path);
  out << "i,j,value,observed\n";
  const std::size_t N = obs.size();
  for (std::size_t j = 0; j < obs.row_limit(); ++j) {
    for (std::size_t k = j + 1; k < N; ++k) {
      if (obs.observed(j, k)) {
        out << j << ',' << k << ',' << csv::format_double(obs.value(j, k)) << ",1\n";
      } else {
        out << j << ',' << k << ",,0\n";
      }
    }
  }
  nlohmann::json meta = obs.metadata();
  meta["N"] = N;
  meta["row_limit"] = obs.row_limit();
  std::ofstream side = csv::open_output(csv::sidecar_path(path));
  side << meta.dump(2) << '\n';
}

ObservedDistances load_observations(const std::filesystem::path& path) {
  struct Row {
    std::size_t i, j;
    double value;
    bool observed;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::size_t max_index = 0;
  {
    std::ifstream in = csv::open_input(path);
    csv::LineReader reader(in);
    std::string line;
    if (!reader.next(line)) {
      throw ParseError("missing header", 1);
    }
    if (line != "i,j,value,observed") {
      throw ParseError("header must be i,j,value,observed", reader.line_number());
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
      Row r{csv::parse_index(f[0], ln), csv::parse_index(f[1], ln), 0.0, false, ln};
      if (f[3] == "1") {
        r.observed = true;
        r.value = csv::parse_double(f[2], ln);
      } else if (f[3] != "0") {
        throw ParseError("observed flag must be 0 or 1", ln);
      }
      if (r.i == r.j) {
        throw ParseError("self pair (" + std::to_string(r.i) + ", " + std::to_string(r.j) + ")", ln);
      }
      if (r.i > r.j) {
        std::swap(r.i, r.j);
      }
      max_index = std::max(max_index, r.j);
      rows.push_back(r);
    }
  }

  std::size_t N = rows.empty() ? 0 : max_index + 1;
  std::size_t row_limit = N;
  nlohmann::json meta = nlohmann::json::object();
  const auto side_path = csv::sidecar_path(path);
  if (std::filesystem::exists(side_path)) {
    std::ifstream side = csv::open_input(side_path);
    try {
      side >> meta;
      N = meta.at("N").get<std::size_t>();
      row_limit = meta.value("row_limit", N);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid observation sidecar: ") + e.what());
    }
  }

  ObservedDistances obs(N, row_limit);
  std::vector<std::uint8_t> seen(obs.stored_pairs(), 0);
  for (const Row& r : rows) {
    if (r.j >= N || !obs.stored(r.i, r.j)) {
      throw ParseError("pair (" + std::to_string(r.i) + ", " + std::to_string(r.j) + ") out of range", r.line);
    }
    const std::size_t s = r.i * N - r.i * (r.i + 1) / 2 + (r.j - r.i - 1);
    if (seen[s] != 0) {
      throw ParseError("duplicate pair (" + std::to_string(r.i) + ", " + std::to_string(r.j) + ")", r.line);
    }
    seen[s] = 1;
    obs.set(r.i, r.j, r.value, r.observed);
  }
  if (std::find(seen.begin(), seen.end(), std::uint8_t{0}) != seen.end()) {
    throw ParseError("table does not list every pair of the " + std::to_string(N) + " points");
  }
  obs.metadata() = std::move(meta);
  return obs;
}

}  // namespace geonet
