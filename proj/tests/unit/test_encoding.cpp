#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hsal/encoding.hpp"
#include "hsal/errors.hpp"

using namespace hsal;

TEST(Sinusoidal, PositionZero) {
  auto p = encode_sinusoidal(0, 6);
  const double expect[] = {0, 1, 0, 1, 0, 1};
  for (int i = 0; i < 6; ++i) EXPECT_EQ(p[i], expect[i]);
}

TEST(Sinusoidal, PositionOneDimFour) {
  auto p = encode_sinusoidal(1, 4);
  EXPECT_NEAR(p[0], 0.84147, 1e-5);
  EXPECT_NEAR(p[1], 0.54030, 1e-5);
  EXPECT_NEAR(p[2], 0.01000, 1e-5);
  EXPECT_NEAR(p[3], 0.99995, 1e-5);
  // direct evaluation: 10000^(-2/4) = 0.01
  EXPECT_NEAR(p[2], std::sin(0.01), 1e-15);
  EXPECT_NEAR(p[3], std::cos(0.01), 1e-15);
}

TEST(Sinusoidal, RangeAndOddWidth) {
  for (double pos : {1.0, 17.0, 1e3, 1e6}) {
    for (double v : encode_sinusoidal(pos, 16)) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_THROW(encode_sinusoidal(1, 3), ConfigError);
  EXPECT_THROW(encode_sinusoidal(1, 0), ConfigError);
  EXPECT_THROW(PositionalEncoder(PositionalKind::Rotary, 5), ConfigError);
}

TEST(Sinusoidal, InjectiveOverFirstThousandPositions) {
  std::vector<std::vector<double>> enc;
  for (int p = 1; p <= 1000; ++p) enc.push_back(encode_sinusoidal(p, 8));
  for (std::size_t a = 0; a < enc.size(); ++a)
    for (std::size_t b = a + 1; b < enc.size(); ++b) ASSERT_NE(enc[a], enc[b]) << a + 1 << " vs " << b + 1;
}

TEST(Rotary, ZeroPositionIsIdentity) {
  std::vector<double> h{0.3, -1.2, 2.0, 0.5};
  EXPECT_EQ(encode_rotary(h, 0.0), h);
}

TEST(Rotary, PreservesNorm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> h(2 * (1 + trial % 8));
    for (auto& x : h) x = d(rng);
    auto r = encode_rotary(h, d(rng) * 100);
    double n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      n0 += h[i] * h[i];
      n1 += r[i] * r[i];
    }
    EXPECT_NEAR(std::sqrt(n0), std::sqrt(n1), 1e-12);
  }
}

TEST(Rotary, QuarterTurnInTwoDimensions) {
  std::vector<double> h{1, 0};
  auto r = encode_rotary(h, std::numbers::pi / 2);  // theta_0 = 1
  EXPECT_NEAR(r[0], 0.0, 1e-12);
  EXPECT_NEAR(r[1], 1.0, 1e-12);
  std::vector<double> odd{1, 2, 3};
  EXPECT_THROW(encode_rotary(odd, 1.0), ConfigError);
}

TEST(Encoding, ParseNames) {
  EXPECT_EQ(parse_positional("sinusoidal"), PositionalKind::Sinusoidal);
  EXPECT_EQ(parse_positional("rotary"), PositionalKind::Rotary);
  EXPECT_EQ(to_string(PositionalKind::Rotary), "rotary");
  EXPECT_THROW(parse_positional("learned"), ConfigError);
}
