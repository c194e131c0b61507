#include <gtest/gtest.h>

#include <random>

#include "archer/rewards.hpp"

using namespace archer;

TEST(BaseReward, BinaryNegativeSuccessIsZero) {
  EXPECT_EQ(base_reward(RewardKind::binary_negative, Vector{0.2, 0.3}, Vector{0.2, 0.3}, 0.05), 0.0);
  EXPECT_EQ(base_reward(RewardKind::binary_negative, Vector{0.0, 0.0}, Vector{0.2, 0.3}, 0.05), -1.0);
}

TEST(BaseReward, BinaryPositiveFailureIsZero) {
  EXPECT_EQ(base_reward(RewardKind::binary_positive, Vector{0.0, 0.0}, Vector{0.2, 0.3}, 0.05), 0.0);
  EXPECT_EQ(base_reward(RewardKind::binary_positive, Vector{0.2, 0.3}, Vector{0.2, 0.3}, 0.05), 1.0);
}

TEST(BaseReward, ShapedIsNegativeDistance) {
  EXPECT_EQ(base_reward(RewardKind::shaped, Vector{3.0, 4.0}, Vector{0.0, 0.0}, 0.05), -5.0);
}

TEST(BaseReward, DimensionMismatchThrows) {
  EXPECT_THROW(base_reward(RewardKind::shaped, Vector{3.0}, Vector{0.0, 0.0}, 0.05), ShapeError);
}

TEST(BaseReward, BinaryKindsDifferByOne) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int i = 0; i < 2000; ++i) {
    const Vector a{u(rng), u(rng)}, g{u(rng), u(rng)};
    ASSERT_EQ(base_reward(RewardKind::binary_negative, a, g, 0.1) + 1.0,
              base_reward(RewardKind::binary_positive, a, g, 0.1));
  }
}

TEST(BaseReward, ShapedIsTranslationInvariantAndZeroOnlyAtGoal) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 1000; ++i) {
    const Vector a{u(rng), u(rng)}, g{u(rng), u(rng)};
    const double dx = 0.25, dy = -0.5;  // exact binary shifts keep the arithmetic comparable
    const Vector a2{a[0] + dx, a[1] + dy}, g2{g[0] + dx, g[1] + dy};
    const double r = base_reward(RewardKind::shaped, a, g, 0.05);
    ASSERT_LT(r, 0.0);
    ASSERT_NEAR(r, base_reward(RewardKind::shaped, a2, g2, 0.05), 1e-12);
    ASSERT_EQ(base_reward(RewardKind::shaped, a, a, 0.05), 0.0);
  }
}

TEST(WeightedReward, VanillaIsIdentity) {
  const TradeOff t{1.0, 1.0};
  for (double b : {-1.0, 0.0, 1.0, -3.7}) {
    EXPECT_EQ(weighted_reward(t, false, b), b);
    EXPECT_EQ(weighted_reward(t, true, b), b);
  }
}

TEST(WeightedReward, AppliesTheMatchingWeight) {
  EXPECT_EQ(weighted_reward({1.0, 0.5}, true, -1.0), -0.5);
  EXPECT_EQ(weighted_reward({2.0, 1.0}, false, 0.0), 0.0);
  EXPECT_EQ(weighted_reward({2.0, 1.0}, false, -1.0), -2.0);
}

TEST(WeightedReward, PreservesSign) {
  Rng rng(3);
  std::uniform_real_distribution<double> lam(0.01, 5.0), b(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const TradeOff t{lam(rng), lam(rng)};
    const double v = b(rng);
    ASSERT_EQ(std::signbit(weighted_reward(t, true, v)), std::signbit(v));
    ASSERT_EQ(std::signbit(weighted_reward(t, false, v)), std::signbit(v));
  }
}

TEST(ValidateTradeoff, Classification) {
  EXPECT_EQ(validate_tradeoff(RewardKind::binary_negative, {1.0, 0.5}), TradeOffClass::archer);
  EXPECT_EQ(validate_tradeoff(RewardKind::binary_positive, {0.5, 1.0}), TradeOffClass::archer);
  EXPECT_EQ(validate_tradeoff(RewardKind::shaped, {1.0, 1.0}), TradeOffClass::vanilla);
  EXPECT_EQ(validate_tradeoff(RewardKind::binary_negative, {0.5, 2.0}), TradeOffClass::anti_archer);
  EXPECT_EQ(validate_tradeoff(RewardKind::binary_positive, {1.0, 0.5}), TradeOffClass::anti_archer);
  EXPECT_EQ(validate_tradeoff(RewardKind::shaped, {2.0, 0.5}), TradeOffClass::archer);
  EXPECT_EQ(validate_tradeoff(RewardKind::binary_negative, {2.0, 2.0}), TradeOffClass::anti_archer);
}

TEST(ValidateTradeoff, RejectsNonPositiveWeights) {
  EXPECT_THROW(validate_tradeoff(RewardKind::binary_negative, {0.0, 1.0}), ConfigError);
  EXPECT_THROW(validate_tradeoff(RewardKind::binary_negative, {1.0, -0.5}), ConfigError);
}

// Archer configurations make weighted hindsight rewards dominate weighted
// real rewards over each kind's value range.
TEST(ValidateTradeoff, ArcherMeansHindsightDominates) {
  Rng rng(4);
  std::uniform_real_distribution<double> lam(0.05, 4.0), mag(0.0, 10.0);
  for (RewardKind kind : {RewardKind::binary_negative, RewardKind::binary_positive, RewardKind::shaped}) {
    for (int i = 0; i < 2000; ++i) {
      const TradeOff t{lam(rng), lam(rng)};
      if (validate_tradeoff(kind, t) != TradeOffClass::archer) continue;
      const double b = is_negative_valued(kind) ? -mag(rng) : mag(rng);
      ASSERT_GE(weighted_reward(t, true, b), weighted_reward(t, false, b));
    }
  }
}

TEST(RewardKindNames, ParseRoundTrip) {
  for (RewardKind k : {RewardKind::binary_negative, RewardKind::binary_positive, RewardKind::shaped}) {
    EXPECT_EQ(parse_reward_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_reward_kind("dense"), ConfigError);
}
