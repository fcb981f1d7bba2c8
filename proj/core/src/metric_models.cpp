#include "geonet/metric_models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "geonet/csv.hpp"
#include "geonet/errors.hpp"

namespace geonet {
namespace {

constexpr double kPi = std::numbers::pi;

double norm(PointView v) {
  double s = 0.0;
  for (double x : v) {
    s += x * x;
  }
  return std::sqrt(s);
}

double wrap_offset(double delta, double period) {
  double d = std::fmod(delta, period);
  if (d > 0.5 * period) {
    d -= period;
  } else if (d <= -0.5 * period) {
    d += period;
  }
  return d;
}

double wrap_coordinate(double x, double period) {
  double y = std::fmod(x, period);
  if (y < 0.0) {
    y += period;
  }
  return y >= period ? 0.0 : y;
}

// Zero-mean shape function of the tilt density.
double tilt_profile(const ManifoldModel& model, PointView p) {
  if (model.kind() == ModelKind::kSphere) {
    return p.back() / model.radius();
  }
  return std::cos(2.0 * kPi * p[0] / model.periods()[0]);
}

Point draw_uniform(const ManifoldModel& model, CounterStream& stream) {
  Point p(model.coordinate_count());
  if (model.kind() == ModelKind::kSphere) {
    double r = 0.0;
    while (r < 1e-150) {
      for (double& x : p) {
        x = stream.normal();
      }
      r = norm(p);
    }
    for (double& x : p) {
      x = model.radius() * (x / r);
    }
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = wrap_coordinate(stream.uniform() * model.periods()[i], model.periods()[i]);
    }
  }
  return p;
}

}  // namespace

ManifoldModel ManifoldModel::sphere(int n, double radius) {
  if (n < 1 || !(radius > 0.0) || !std::isfinite(radius)) {
    throw ConfigError("sphere requires n >= 1 and a positive finite radius");
  }
  ManifoldModel m;
  m.kind_ = ModelKind::kSphere;
  m.n_ = n;
  m.radius_ = radius;
  return m;
}

ManifoldModel ManifoldModel::flat_torus(std::vector<double> periods) {
  if (periods.empty()) {
    throw ConfigError("flat torus requires at least one period");
  }
  for (double L : periods) {
    if (!(L > 0.0) || !std::isfinite(L)) {
      throw ConfigError("flat torus periods must be positive and finite");
    }
  }
  ManifoldModel m;
  m.kind_ = ModelKind::kFlatTorus;
  m.n_ = static_cast<int>(periods.size());
  m.radius_ = 0.0;
  m.periods_ = std::move(periods);
  return m;
}

std::size_t ManifoldModel::coordinate_count() const noexcept {
  return kind_ == ModelKind::kSphere ? static_cast<std::size_t>(n_) + 1 : periods_.size();
}

double ManifoldModel::volume() const {
  if (kind_ == ModelKind::kSphere) {
    const double k = n_ + 1.0;
    return 2.0 * std::pow(kPi, k / 2.0) / std::tgamma(k / 2.0) * std::pow(radius_, n_);
  }
  double v = 1.0;
  for (double L : periods_) {
    v *= L;
  }
  return v;
}

double ManifoldModel::diameter() const {
  if (kind_ == ModelKind::kSphere) {
    return kPi * radius_;
  }
  double s = 0.0;
  for (double L : periods_) {
    s += 0.25 * L * L;
  }
  return std::sqrt(s);
}

void ManifoldModel::validate_point(PointView p) const {
  if (p.size() != coordinate_count()) {
    throw CoordinateError("point has " + std::to_string(p.size()) + " coordinates, expected " +
                          std::to_string(coordinate_count()));
  }
  for (double x : p) {
    if (!std::isfinite(x)) {
      throw CoordinateError("point has a non-finite coordinate");
    }
  }
  if (kind_ == ModelKind::kSphere) {
    const double r = norm(p);
    if (std::abs(r - radius_) > 1e-12 * radius_) {
      throw CoordinateError("sphere point has norm " + csv::format_double(r) + ", expected " +
                            csv::format_double(radius_));
    }
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < 0.0 || p[i] >= periods_[i]) {
        throw CoordinateError("torus coordinate " + csv::format_double(p[i]) + " outside [0, " +
                              csv::format_double(periods_[i]) + ")");
      }
    }
  }
}

double ManifoldModel::distance(PointView p, PointView q) const noexcept {
  if (kind_ == ModelKind::kSphere) {
    double diff = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - q[i];
      const double s = p[i] + q[i];
      diff += d * d;
      sum += s * s;
    }
    return radius_ * 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = std::abs(p[i] - q[i]);
    const double d = std::min(a, periods_[i] - a);
    s += d * d;
  }
  return std::sqrt(s);
}

Point ManifoldModel::log_map(PointView p, PointView q) const {
  Point v(p.size(), 0.0);
  if (kind_ == ModelKind::kFlatTorus) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = wrap_offset(q[i] - p[i], periods_[i]);
    }
    return v;
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    dot += p[i] * q[i];
  }
  const double c = dot / (radius_ * radius_);
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = q[i] - c * p[i];
  }
  const double w = norm(v);
  if (w == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    return v;
  }
  const double scale = distance(p, q) / w;
  for (double& x : v) {
    x *= scale;
  }
  return v;
}

Point ManifoldModel::exp_map(PointView p, PointView v) const {
  Point q(p.size());
  if (kind_ == ModelKind::kFlatTorus) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      q[i] = wrap_coordinate(p[i] + v[i], periods_[i]);
    }
    return q;
  }
  const double s = norm(v);
  if (s == 0.0) {
    return Point(p.begin(), p.end());
  }
  const double angle = s / radius_;
  const double cs = std::cos(angle);
  const double sn = std::sin(angle) * radius_ / s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q[i] = cs * p[i] + sn * v[i];
  }
  const double r = norm(q);
  for (double& x : q) {
    x *= radius_ / r;
  }
  return q;
}

nlohmann::json ManifoldModel::to_json() const {
  if (kind_ == ModelKind::kSphere) {
    return {{"kind", "sphere"}, {"n", n_}, {"radius", radius_}};
  }
  return {{"kind", "flat_torus"}, {"periods", periods_}};
}

ManifoldModel ManifoldModel::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "sphere") {
      return sphere(j.at("n").get<int>(), j.value("radius", 1.0));
    }
    if (kind == "flat_torus") {
      return flat_torus(j.at("periods").get<std::vector<double>>());
    }
    throw ConfigError("unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model description: ") + e.what());
  }
}

double geodesic_distance(const ManifoldModel& model, PointView p, PointView q) {
  model.validate_point(p);
  model.validate_point(q);
  return model.distance(p, q);
}

void DensitySpec::validate() const {
  if (kind == Kind::kTilt && !(std::abs(amplitude) < 1.0)) {
    throw ConfigError("tilt amplitude must satisfy |a| < 1 for a positive normalizable density");
  }
}

nlohmann::json DensitySpec::to_json() const {
  if (kind == Kind::kUniform) {
    return {{"kind", "uniform"}};
  }
  return {{"kind", "tilt"}, {"amplitude", amplitude}};
}

DensitySpec DensitySpec::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    DensitySpec d;
    if (kind == "uniform") {
      d = uniform();
    } else if (kind == "tilt") {
      d = tilt(j.at("amplitude").get<double>());
    } else {
      throw ConfigError("unknown density kind '" + kind + "'");
    }
    d.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid density description: ") + e.what());
  }
}

double density_at(const ManifoldModel& model, const DensitySpec& density, PointView p) {
  const double base = 1.0 / model.volume();
  if (density.kind == DensitySpec::Kind::kUniform) {
    return base;
  }
  return base * (1.0 + density.amplitude * tilt_profile(model, p));
}

nlohmann::json GeometryBounds::to_json() const {
  return {{"n", n}, {"D", D}, {"Lambda", Lambda}, {"i0", i0}, {"rho_min", rho_min}, {"rho_max", rho_max}, {"V0", V0}};
}

GeometryBounds model_bounds(const ManifoldModel& model, const DensitySpec& density) {
  density.validate();
  GeometryBounds b;
  b.n = model.dimension();
  b.D = model.diameter();
  if (model.kind() == ModelKind::kSphere) {
    b.Lambda = 1.0 / model.radius();
    b.i0 = kPi * model.radius();
  } else {
    b.Lambda = 0.0;
    b.i0 = 0.5 * *std::min_element(model.periods().begin(), model.periods().end());
  }
  const double a = density.kind == DensitySpec::Kind::kTilt ? std::abs(density.amplitude) : 0.0;
  const double vol = model.volume();
  b.rho_min = (1.0 - a) / vol;
  b.rho_max = (1.0 + a) / vol;
  b.V0 = hyperbolic_ball_volume(b.n, b.Lambda, b.D);
  return b;
}

double unit_ball_volume(int n) {
  return std::pow(kPi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
}

double hyperbolic_ball_volume(int n, double Lambda, double r) {
  if (n < 1 || r < 0.0 || Lambda < 0.0) {
    throw ParameterError("hyperbolic_ball_volume requires n >= 1, r >= 0, Lambda >= 0");
  }
  const double omega = unit_ball_volume(n);
  if (Lambda == 0.0 || r == 0.0) {
    return omega * std::pow(r, n);
  }
  const double x = Lambda * r;
  switch (n) {
    case 1:
      return 2.0 * r;
    case 2:
      return 2.0 * kPi * (std::cosh(x) - 1.0) / (Lambda * Lambda);
    case 3:
      return kPi * (std::sinh(2.0 * x) - 2.0 * x) / (Lambda * Lambda * Lambda);
    default:
      break;
  }
  // Surface area n*omega_n times the radial integral of (sinh(Lambda t)/Lambda)^{n-1}.
  constexpr int kIntervals = 4096;
  const double h = r / kIntervals;
  auto f = [&](double t) { return std::pow(std::sinh(Lambda * t) / Lambda, n - 1); };
  double s = f(0.0) + f(r);
  for (int i = 1; i < kIntervals; ++i) {
    s += (i % 2 == 1 ? 4.0 : 2.0) * f(i * h);
  }
  return n * omega * s * h / 3.0;
}

SampleSet::SampleSet(ManifoldModel model, DensitySpec density, std::uint64_t seed, DenseTable<double> points)
    : model_(std::move(model)), density_(density), seed_(seed), points_(std::move(points)) {
  if (!points_.empty() && points_.cols() != model_.coordinate_count()) {
    throw InputError("sample table width does not match the model");
  }
}

Point sample_one(const ManifoldModel& model, const DensitySpec& density, std::uint64_t seed,
                 StreamTag stream_tag, std::uint64_t a, std::uint64_t b) {
  CounterStream stream(seed, stream_tag, a, b);
  if (density.kind == DensitySpec::Kind::kUniform) {
    return draw_uniform(model, stream);
  }
  const double bound = 1.0 + std::abs(density.amplitude);
  for (;;) {
    Point p = draw_uniform(model, stream);
    if (stream.uniform() * bound < 1.0 + density.amplitude * tilt_profile(model, p)) {
      return p;
    }
  }
}

SampleSet sample_points(const ManifoldModel& model, std::size_t N, const DensitySpec& density,
                        std::uint64_t seed) {
  density.validate();
  DenseTable<double> points(N, model.coordinate_count());
  for (std::size_t i = 0; i < N; ++i) {
    const Point p = sample_one(model, density, seed, StreamTag::kSamplePoint, i);
    std::copy(p.begin(), p.end(), points.row(i).begin());
  }
  return SampleSet(model, density, seed, std::move(points));
}

void save_samples(const SampleSet& samples, const std::filesystem::path& path) {
  std::ofstream out = csv::open_output(path);
  const std::size_t k = samples.model().coordinate_count();
  out << "index";
  for (std::size_t c = 1; c <= k; ++c) {
    out << ",c" << c;
  }
  out << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << i;
    for (double x : samples.point(i)) {
      out << ',' << csv::format_double(x);
    }
    out << '\n';
  }
  nlohmann::json meta = {{"model", samples.model().to_json()},
                         {"density", samples.density().to_json()},
                         {"seed", samples.seed()},
                         {"N", samples.size()}};
  std::ofstream side = csv::open_output(csv::sidecar_path(path));
  side << meta.dump(2) << '\n';
}

SampleSet load_samples(const std::filesystem::path& path) {
  nlohmann::json meta;
  {
    std::ifstream side = csv::open_input(csv::sidecar_path(path));
    try {
      side >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid sample sidecar: ") + e.what());
    }
  }
  const ManifoldModel model = ManifoldModel::from_json(meta.at("model"));
  const DensitySpec density = DensitySpec::from_json(meta.at("density"));
  const std::uint64_t seed = meta.value("seed", std::uint64_t{0});
  const std::size_t k = model.coordinate_count();

  std::ifstream in = csv::open_input(path);
  csv::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) {
    throw ParseError("missing header", 1);
  }
  const auto header = csv::split(line);
  if (header.size() != k + 1 || header[0] != "index") {
    throw ParseError("header must be index,c1..c" + std::to_string(k), reader.line_number());
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (reader.next(line)) {
    if (line.empty()) {
      continue;
    }
    const auto fields = csv::split(line);
    if (fields.size() != k + 1) {
      throw ParseError("expected " + std::to_string(k + 1) + " fields", reader.line_number());
    }
    if (csv::parse_index(fields[0], reader.line_number()) != rows) {
      throw ParseError("indices must be consecutive from 0", reader.line_number());
    }
    const std::size_t start = values.size();
    for (std::size_t c = 1; c <= k; ++c) {
      values.push_back(csv::parse_double(fields[c], reader.line_number()));
    }
    try {
      model.validate_point(PointView(values.data() + start, k));
    } catch (const CoordinateError& e) {
      throw ParseError(e.what(), reader.line_number());
    }
    ++rows;
  }
  DenseTable<double> points(rows, k);
  std::copy(values.begin(), values.end(), points.data().begin());
  return SampleSet(model, density, seed, std::move(points));
}

}  // namespace geonet
