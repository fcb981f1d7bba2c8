#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "geonet/metric_models.hpp"
#include "geonet/rng.hpp"

namespace geonet {

/// Additive measurement noise on each observed distance.
struct NoiseSpec {
  enum class Family { kNone, kGaussian, kLaplace };
  Family family = Family::kNone;
  /// Standard deviation for gaussian, scale b for laplace.
  double scale = 0.0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(double sigma) { return {Family::kGaussian, sigma}; }
  static NoiseSpec laplace(double b) { return {Family::kLaplace, b}; }

  /// Standard deviation of the noise.
  double sigma() const noexcept;
  double draw(CounterStream& stream) const noexcept;

  void validate() const;
  nlohmann::json to_json() const;
  static NoiseSpec from_json(const nlohmann::json& j);

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// E exp(|eta|). Throws UnsupportedNoiseError when the moment is infinite.
double beta_of(const NoiseSpec& noise);

/// Observation probability Phi(x, y) = min(1, m(x, y) * Phi1(d(x, y))).
struct MaskSpec {
  enum class Profile { kConstant, kExponential, kSmoothCutoff };
  Profile profile = Profile::kConstant;
  double phi0 = 1.0;
  /// Decay length for exponential, support radius for smooth cutoff.
  double length = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  /// m(x, y) = 1 + anisotropy * (u(x) + u(y)) / 2 with u in [-1, 1].
  double anisotropy = 0.0;
  /// C1 bound on Phi1; 0 selects max(sup Phi1, sup |Phi1'|).
  double H = 0.0;

  static MaskSpec constant(double phi0);
  static MaskSpec exponential(double phi0, double decay_length);
  static MaskSpec smooth_cutoff(double phi0, double range);

  double phi1(double s) const noexcept;
  double phi1_slope(double s) const noexcept;
  double max_slope() const noexcept;
  double effective_H() const noexcept;
  double multiplier(const ManifoldModel& model, PointView x, PointView y) const noexcept;
  double phi(const ManifoldModel& model, PointView x, PointView y) const noexcept;
  double phi(const ManifoldModel& model, PointView x, PointView y, double distance) const noexcept;

  void validate() const;
  nlohmann::json to_json() const;
  static MaskSpec from_json(const nlohmann::json& j);

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

/// Symmetric table of noisy distances with per-pair observation flags.
///
/// Storage is the packed upper triangle restricted to pairs whose smaller
/// index is below row_limit(). The estimators only read pairs that touch the
/// first two nets, so the third net never needs its own rows.
class ObservedDistances {
 public:
  ObservedDistances() = default;
  explicit ObservedDistances(std::size_t N) : ObservedDistances(N, N) {}
  ObservedDistances(std::size_t N, std::size_t row_limit);

  std::size_t size() const noexcept { return n_; }
  std::size_t row_limit() const noexcept { return row_limit_; }
  std::size_t stored_pairs() const noexcept { return flags_.size(); }

  bool stored(std::size_t j, std::size_t k) const noexcept;
  bool observed(std::size_t j, std::size_t k) const;
  /// Throws MaskedReadError for an unobserved pair.
  double value(std::size_t j, std::size_t k) const;
  void set(std::size_t j, std::size_t k, double value, bool observed);

  /// Values and flags of pairs (j, k) for k in [begin, end); requires j < begin.
  /// Masked slots hold 0.0 so products with the flag are always finite.
  std::span<const double> row_values(std::size_t j, std::size_t begin, std::size_t end) const;
  std::span<const std::uint8_t> row_flags(std::size_t j, std::size_t begin, std::size_t end) const;

  std::size_t observed_count() const noexcept;

  nlohmann::json& metadata() noexcept { return metadata_; }
  const nlohmann::json& metadata() const noexcept { return metadata_; }

  friend bool operator==(const ObservedDistances& a, const ObservedDistances& b) {
    return a.n_ == b.n_ && a.row_limit_ == b.row_limit_ && a.values_ == b.values_ && a.flags_ == b.flags_;
  }

 private:
  std::size_t slot(std::size_t j, std::size_t k) const;
  std::size_t row_offset(std::size_t j) const noexcept { return j * n_ - j * (j + 1) / 2; }

  std::size_t n_ = 0;
  std::size_t row_limit_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> flags_;
  nlohmann::json metadata_ = nlohmann::json::object();
};

struct GenerateOptions {
  /// Only pairs with min index below this are generated; 0 means all.
  std::size_t row_limit = 0;
  unsigned threads = 1;
};

ObservedDistances generate_observations(const ManifoldModel& model, const SampleSet& samples,
                                        const NoiseSpec& noise, const MaskSpec& mask, std::uint64_t seed,
                                        const GenerateOptions& options = {});

void save_observations(const ObservedDistances& obs, const std::filesystem::path& path);
ObservedDistances load_observations(const std::filesystem::path& path);

}  // namespace geonet
