#pragma once

// Goal-conditioned environments: a 2-link planar reacher with closed-form
// kinematics and a point mass moving in a square.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "archer/errors.hpp"
#include "archer/numcore.hpp"
#include "archer/rng.hpp"

namespace archer {

enum class EnvKind { reacher, pointgoal };

inline std::string_view to_string(EnvKind k) { return k == EnvKind::reacher ? "reacher" : "pointgoal"; }

inline EnvKind parse_env_kind(std::string_view s) {
  if (s == "reacher") return EnvKind::reacher;
  if (s == "pointgoal") return EnvKind::pointgoal;
  throw ConfigError("unknown env '" + std::string(s) + "' (expected reacher|pointgoal)");
}

inline constexpr double kSparseTolerance = 0.05;
inline constexpr double kDenseTolerance = 0.25;

struct EnvSpec {
  EnvKind kind = EnvKind::reacher;
  std::size_t state_dim = 4;
  std::size_t goal_dim = 2;
  std::size_t action_dim = 2;
  double link1 = 0.5;
  double link2 = 0.5;
  // Reacher: radians per step at |action| = 1. PointGoal: distance per step.
  double max_displacement = 0.1;
  // PointGoal positions and goals live in [-extent, extent]^2.
  double workspace_half_extent = 1.0;
  double success_tolerance = kSparseTolerance;
  std::size_t episode_length = 50;

  void validate() const {
    if (state_dim == 0 || goal_dim == 0 || action_dim == 0) throw ConfigError("env dims must be positive");
    if (!(success_tolerance > 0.0)) throw ConfigError("success tolerance must be positive");
    if (episode_length == 0) throw ConfigError("episode length must be positive");
    if (!(max_displacement > 0.0)) throw ConfigError("max displacement must be positive");
    if (kind == EnvKind::reacher && !(link1 > 0.0 && link2 > 0.0)) throw ConfigError("link lengths must be positive");
    if (kind == EnvKind::pointgoal && !(workspace_half_extent > 0.0)) throw ConfigError("workspace must be non-empty");
    if (state_dim != 4 || goal_dim != 2 || action_dim != 2) {
      throw ConfigError("planar environments use state_dim 4, goal_dim 2, action_dim 2");
    }
  }
};

inline EnvSpec reacher_spec() { return EnvSpec{}; }

inline EnvSpec pointgoal_spec() {
  EnvSpec s;
  s.kind = EnvKind::pointgoal;
  return s;
}

/// Reacher physical = (q1, q2, v1, v2); PointGoal physical = (x, y, vx, vy).
struct GoalEnvState {
  Vector physical;
  Vector goal;
  std::size_t step_index = 0;

  friend bool operator==(const GoalEnvState&, const GoalEnvState&) = default;
};

struct StepDiagnostics {
  std::size_t clamped_components = 0;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

/// End-effector position for joint angles (q1, q2).
inline Vector reacher_forward_kinematics(double link1, double link2, double q1, double q2) {
  return {link1 * std::cos(q1) + link2 * std::cos(q1 + q2), link1 * std::sin(q1) + link2 * std::sin(q1 + q2)};
}

inline Vector achieved_goal(const EnvSpec& spec, const GoalEnvState& state) {
  if (spec.kind == EnvKind::reacher) {
    return reacher_forward_kinematics(spec.link1, spec.link2, state.physical[0], state.physical[1]);
  }
  return {state.physical[0], state.physical[1]};
}

inline double goal_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("goal dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Tolerance-ball membership; the boundary counts as success.
inline bool is_success(const EnvSpec& spec, const GoalEnvState& state, std::span<const double> goal) {
  if (goal.size() != spec.goal_dim) throw ShapeError("goal dimension mismatch");
  return goal_distance(achieved_goal(spec, state), goal) <= spec.success_tolerance;
}

inline GoalEnvState reset(const EnvSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GoalEnvState s;
  s.physical.assign(spec.state_dim, 0.0);
  if (spec.kind == EnvKind::reacher) {
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    s.physical[0] = wrap_angle(angle(rng));
    s.physical[1] = wrap_angle(angle(rng));
    // Uniform by area over the reachable annulus.
    const double r_in = std::abs(spec.link1 - spec.link2);
    const double r_out = spec.link1 + spec.link2;
    const double radius = std::sqrt(r_in * r_in + unit(rng) * (r_out * r_out - r_in * r_in));
    const double theta = angle(rng);
    s.goal = {radius * std::cos(theta), radius * std::sin(theta)};
  } else {
    std::uniform_real_distribution<double> coord(-spec.workspace_half_extent, spec.workspace_half_extent);
    s.physical[0] = coord(rng);
    s.physical[1] = coord(rng);
    s.goal = {coord(rng), coord(rng)};
  }
  s.step_index = 0;
  return s;
}

/// Applies one action. Components outside [-1, 1] are clamped and counted.
inline GoalEnvState step(const EnvSpec& spec, const GoalEnvState& state, std::span<const double> action,
                         StepDiagnostics& diag) {
  if (action.size() != spec.action_dim) {
    throw ShapeError("action has " + std::to_string(action.size()) + " components, expected " +
                     std::to_string(spec.action_dim));
  }
  if (state.step_index >= spec.episode_length) throw Error("step past the end of the episode");
  double a[2];
  for (std::size_t i = 0; i < 2; ++i) {
    double v = action[i];
    if (!(v >= -1.0 && v <= 1.0)) {
      ++diag.clamped_components;
      v = std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0);
    }
    a[i] = v;
  }
  GoalEnvState next = state;
  const double d0 = spec.max_displacement * a[0];
  const double d1 = spec.max_displacement * a[1];
  if (spec.kind == EnvKind::reacher) {
    next.physical[0] = wrap_angle(state.physical[0] + d0);
    next.physical[1] = wrap_angle(state.physical[1] + d1);
    next.physical[2] = d0;
    next.physical[3] = d1;
  } else {
    const double lim = spec.workspace_half_extent;
    const double x = std::clamp(state.physical[0] + d0, -lim, lim);
    const double y = std::clamp(state.physical[1] + d1, -lim, lim);
    next.physical[2] = x - state.physical[0];
    next.physical[3] = y - state.physical[1];
    next.physical[0] = x;
    next.physical[1] = y;
  }
  next.step_index = state.step_index + 1;
  return next;
}

inline GoalEnvState step(const EnvSpec& spec, const GoalEnvState& state, std::span<const double> action) {
  StepDiagnostics ignored;
  return step(spec, state, action, ignored);
}

}  // namespace archer
