#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "geonet/csv.hpp"
#include "geonet/errors.hpp"
#include "geonet/parallel.hpp"
#include "geonet/rng.hpp"

namespace geonet {
namespace {

TEST(Philox, MatchesPublishedKnownAnswers) {
  EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}),
            (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterStream, SameKeyGivesSameSequence) {
  CounterStream a(42, StreamTag::kNoise, 3, 9);
  CounterStream b(42, StreamTag::kNoise, 3, 9);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
  }
}

TEST(CounterStream, DistinctKeysDiffer) {
  const std::uint64_t base = CounterStream(1, StreamTag::kNoise, 0, 1).next_u64();
  EXPECT_NE(base, CounterStream(2, StreamTag::kNoise, 0, 1).next_u64());
  EXPECT_NE(base, CounterStream(1, StreamTag::kMask, 0, 1).next_u64());
  EXPECT_NE(base, CounterStream(1, StreamTag::kNoise, 1, 0).next_u64());
  EXPECT_NE(base, CounterStream(1, StreamTag::kNoise, 0, 2).next_u64());
}

TEST(CounterStream, UniformRangesAndMoments) {
  CounterStream s(5, StreamTag::kOracle, 0);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = s.uniform_open();
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sum_sq / n - mean * mean, 1.0 / 12.0, 0.002);
}

TEST(CounterStream, NormalMoments) {
  CounterStream s(11, StreamTag::kOracle, 1);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sum_sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sum_sq / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(CounterStream, BelowStaysInRangeAndCoversIt) {
  CounterStream s(3, StreamTag::kRefinementSample, 0);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = s.below(7);
    ASSERT_LT(v, 7u);
    ++hits[v];
  }
  for (int h : hits) {
    EXPECT_GT(h, 800);
    EXPECT_LT(h, 1200);
  }
}

TEST(Parallel, VisitsEveryIndexOnce) {
  for (unsigned threads : {1u, 3u, 8u, 0u}) {
    std::vector<std::atomic<int>> seen(1001);
    parallel_for(seen.size(), threads, [&](std::size_t i) { seen[i].fetch_add(1); });
    for (const auto& s : seen) {
      EXPECT_EQ(s.load(), 1);
    }
  }
}

TEST(Parallel, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 57) {
                                throw std::runtime_error("boom");
                              }
                            }),
               std::runtime_error);
}

TEST(Parallel, ResolvesZeroToHardware) {
  EXPECT_GE(resolve_threads(0), 1u);
  EXPECT_EQ(resolve_threads(3), 3u);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.1}) {
    const std::string s = csv::format_double(v);
    EXPECT_EQ(csv::parse_double(s, 1), v) << s;
  }
  EXPECT_EQ(csv::format_double(0.1), "0.1");
}

TEST(Csv, StrictParsingReportsLine) {
  EXPECT_THROW(csv::parse_double("1.5x", 4), ParseError);
  EXPECT_THROW(csv::parse_index("-1", 4), ParseError);
  try {
    csv::parse_double("", 9);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 9u);
    EXPECT_EQ(std::string(e.what()).rfind("line 9: ", 0), 0u);
  }
}

TEST(Csv, SplitKeepsEmptyFields) {
  const auto f = csv::split("1,,3,");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(f[3], "");
}

}  // namespace
}  // namespace geonet
