#pragma once

#include <array>
#include <cstdint>

namespace geonet {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Stateless: output depends only on (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

/// Stream purpose tags. Every independent random quantity in the library
/// draws from its own (seed, tag, a, b) stream so results never depend on
/// iteration order or thread count.
enum class StreamTag : std::uint32_t {
  kSamplePoint = 1,
  kNoise = 2,
  kMask = 3,
  kPerturbation = 4,
  kRefinementSample = 5,
  kOracle = 6,
  kReference = 7,
  kPairSelection = 8,
};

/// Sequential reader over the Philox blocks of one (seed, tag, a, b) key.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, StreamTag tag, std::uint64_t a, std::uint64_t b = 0);

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1); safe as a logarithm argument.
  double uniform_open() noexcept;
  /// Standard normal draw (Box-Muller, one value per two uniforms).
  double normal() noexcept;
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  Philox4x32::Key key_;
  Philox4x32::Counter counter_;
  Philox4x32::Counter block_{};
  int used_ = 4;
};

}  // namespace geonet
