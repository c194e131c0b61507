#pragma once

#include <span>
#include <string>
#include <string_view>

#include "archer/envs.hpp"
#include "archer/errors.hpp"

namespace archer {

enum class RewardKind { binary_negative, binary_positive, shaped };

inline std::string_view to_string(RewardKind k) {
  switch (k) {
    case RewardKind::binary_negative:
      return "binary_negative";
    case RewardKind::binary_positive:
      return "binary_positive";
    case RewardKind::shaped:
      return "shaped";
  }
  return "?";
}

inline RewardKind parse_reward_kind(std::string_view s) {
  if (s == "binary_negative") return RewardKind::binary_negative;
  if (s == "binary_positive") return RewardKind::binary_positive;
  if (s == "shaped") return RewardKind::shaped;
  throw ConfigError("unknown reward '" + std::string(s) + "' (expected binary_negative|binary_positive|shaped)");
}

/// Rewards of this kind are never positive.
inline bool is_negative_valued(RewardKind k) { return k != RewardKind::binary_positive; }

/// Multipliers for rewards of real (lambda_r) and hindsight (lambda_h) transitions.
struct TradeOff {
  double lambda_r = 1.0;
  double lambda_h = 1.0;

  friend bool operator==(const TradeOff&, const TradeOff&) = default;
};

enum class TradeOffClass { archer, vanilla, anti_archer };

inline std::string_view to_string(TradeOffClass c) {
  switch (c) {
    case TradeOffClass::archer:
      return "archer";
    case TradeOffClass::vanilla:
      return "vanilla";
    case TradeOffClass::anti_archer:
      return "anti_archer";
  }
  return "?";
}

/// Task reward for reaching `achieved` when `goal` was intended.
inline double base_reward(RewardKind kind, std::span<const double> achieved, std::span<const double> goal,
                          double tolerance) {
  if (achieved.size() != goal.size()) throw ShapeError("achieved and goal dimensions differ");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  const double dist = goal_distance(achieved, goal);
  switch (kind) {
    case RewardKind::binary_negative:
      return dist <= tolerance ? 0.0 : -1.0;
    case RewardKind::binary_positive:
      return dist <= tolerance ? 1.0 : 0.0;
    case RewardKind::shaped:
      return -dist;
  }
  return 0.0;
}

inline double weighted_reward(const TradeOff& t, bool is_hindsight, double base) {
  return (is_hindsight ? t.lambda_h : t.lambda_r) * base;
}

/// Weighted hindsight rewards dominate real ones exactly when lambda_r > lambda_h
/// for never-positive rewards, and when lambda_r < lambda_h for never-negative ones.
inline TradeOffClass validate_tradeoff(RewardKind kind, const TradeOff& t) {
  if (!(t.lambda_r > 0.0) || !(t.lambda_h > 0.0)) {
    throw ConfigError("trade-off weights must be strictly positive (got lambda_r=" + std::to_string(t.lambda_r) +
                      ", lambda_h=" + std::to_string(t.lambda_h) + ")");
  }
  if (t.lambda_r == 1.0 && t.lambda_h == 1.0) return TradeOffClass::vanilla;
  if (is_negative_valued(kind)) return t.lambda_r > t.lambda_h ? TradeOffClass::archer : TradeOffClass::anti_archer;
  return t.lambda_r < t.lambda_h ? TradeOffClass::archer : TradeOffClass::anti_archer;
}

}  // namespace archer
