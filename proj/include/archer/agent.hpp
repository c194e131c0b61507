#pragma once

// DDPG actor-critic over goal-conditioned inputs s||g, with target networks
// and episodic Ornstein-Uhlenbeck exploration noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "archer/errors.hpp"
#include "archer/numcore.hpp"
#include "archer/replay.hpp"
#include "archer/rng.hpp"

namespace archer {

struct AgentHyperparams {
  double gamma = 0.98;
  double tau = 0.001;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
};

/// Actor mu(s||g) and critic Q(s||g||a), each with a slowly tracking target copy.
struct DdpgAgent {
  MlpParams actor;
  MlpParams critic;
  MlpParams target_actor;
  MlpParams target_critic;
  AdamState actor_adam;
  AdamState critic_adam;
  double gamma = 0.98;
  double tau = 0.001;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;

  /// Targets start as exact copies of the online networks.
  static DdpgAgent from_networks(MlpParams actor, MlpParams critic, const AgentHyperparams& h = {}) {
    h.validate();
    DdpgAgent a;
    a.target_actor = actor;
    a.target_critic = critic;
    a.actor_adam = AdamState::for_params(actor);
    a.critic_adam = AdamState::for_params(critic);
    a.actor = std::move(actor);
    a.critic = std::move(critic);
    a.gamma = h.gamma;
    a.tau = h.tau;
    a.actor_lr = h.actor_lr;
    a.critic_lr = h.critic_lr;
    a.validate();
    return a;
  }

  /// Relu hidden layers of the given widths; tanh actor output, linear critic output.
  static DdpgAgent create(std::size_t obs_dim, std::size_t action_dim, std::span<const std::size_t> hidden,
                          const AgentHyperparams& h, Rng& rng) {
    MlpParams actor = make_mlp(obs_dim, hidden, action_dim, Activation::tanh, rng);
    MlpParams critic = make_mlp(obs_dim + action_dim, hidden, 1, Activation::linear, rng);
    return from_networks(std::move(actor), std::move(critic), h);
  }

  std::size_t obs_dim() const { return actor.in_dim(); }
  std::size_t action_dim() const { return actor.out_dim(); }

  void validate() const {
    actor.validate();
    critic.validate();
    if (critic.in_dim() != actor.in_dim() + actor.out_dim() || critic.out_dim() != 1) {
      throw ShapeError("critic must map obs_dim + action_dim inputs to one value");
    }
    auto same_shape = [](const MlpParams& a, const MlpParams& b) {
      if (a.layers.size() != b.layers.size()) return false;
      for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].in_dim() != b.layers[i].in_dim() || a.layers[i].out_dim() != b.layers[i].out_dim() ||
            a.layers[i].activation != b.layers[i].activation)
          return false;
      }
      return true;
    };
    if (!same_shape(actor, target_actor) || !same_shape(critic, target_critic)) {
      throw ShapeError("target networks must match their online networks");
    }
  }

  friend bool operator==(const DdpgAgent&, const DdpgAgent&) = default;
};

/// Ornstein-Uhlenbeck process with zero mean and dt = 1, scaled by epsilon
/// when added to actions.
struct OuNoise {
  Vector state;
  double theta = 0.15;
  double sigma = 0.2;
  double epsilon = 0.1;
  double epsilon_decay = 0.99;

  explicit OuNoise(std::size_t dim = 0, double epsilon0 = 0.1, double decay = 0.99)
      : state(dim, 0.0), epsilon(epsilon0), epsilon_decay(decay) {}

  void reset() { std::fill(state.begin(), state.end(), 0.0); }
  void decay() { epsilon *= epsilon_decay; }
};

inline Vector ou_step(OuNoise& noise, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : noise.state) x += noise.theta * (0.0 - x) + noise.sigma * normal(rng);
  return noise.state;
}

inline Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

/// Actor output on s||g, plus epsilon-scaled OU noise when `noise` is given,
/// clamped into [-1, 1].
inline Vector select_action(const DdpgAgent& agent, std::span<const double> state, std::span<const double> goal,
                            OuNoise* noise, Rng& rng) {
  if (state.size() + goal.size() != agent.obs_dim()) {
    throw ShapeError("state||goal has " + std::to_string(state.size() + goal.size()) +
                     " components, actor expects " + std::to_string(agent.obs_dim()));
  }
  Vector a = mlp_predict(agent.actor, concat(state, goal));
  if (noise != nullptr) {
    if (noise->state.size() != a.size()) throw ShapeError("noise dimension does not match action dimension");
    const Vector n = ou_step(*noise, rng);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += noise->epsilon * n[i];
  }
  for (double& v : a) v = std::clamp(v, -1.0, 1.0);
  return a;
}

namespace detail {

struct BatchMatrices {
  Matrix obs;       // s || g
  Matrix next_obs;  // s' || g
  Matrix obs_action;  // s || g || a
  Vector reward;
};

inline BatchMatrices assemble(const DdpgAgent& agent, std::span<const Transition> batch) {
  const std::size_t n = batch.size();
  const std::size_t od = agent.obs_dim();
  const std::size_t ad = agent.action_dim();
  BatchMatrices m{Matrix(n, od), Matrix(n, od), Matrix(n, od + ad), Vector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = batch[i];
    if (t.state.size() + t.goal.size() != od || t.next_state.size() != t.state.size() || t.action.size() != ad) {
      throw ShapeError("transition " + std::to_string(i) + " does not match the agent dimensions");
    }
    auto o = m.obs.row(i);
    auto no = m.next_obs.row(i);
    auto oa = m.obs_action.row(i);
    std::copy(t.state.begin(), t.state.end(), o.begin());
    std::copy(t.goal.begin(), t.goal.end(), o.begin() + t.state.size());
    std::copy(t.next_state.begin(), t.next_state.end(), no.begin());
    std::copy(t.goal.begin(), t.goal.end(), no.begin() + t.state.size());
    std::copy(o.begin(), o.end(), oa.begin());
    std::copy(t.action.begin(), t.action.end(), oa.begin() + od);
    m.reward[i] = t.reward;
  }
  return m;
}

inline Matrix join_columns(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + a.cols());
  }
  return out;
}

inline Vector targets_from(const DdpgAgent& agent, const BatchMatrices& m) {
  const Matrix next_action = mlp_predict(agent.target_actor, m.next_obs);
  const Matrix q_next = mlp_predict(agent.target_critic, join_columns(m.next_obs, next_action));
  Vector y(m.reward.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = m.reward[i] + agent.gamma * q_next(i, 0);
  return y;
}

}  // namespace detail

/// TD targets y_i = r_i + gamma * Q'(s'_i||g_i, mu'(s'_i||g_i)) from the target networks.
inline Vector critic_targets(const DdpgAgent& agent, std::span<const Transition> batch) {
  if (batch.empty()) throw ShapeError("critic targets need a non-empty batch");
  return detail::targets_from(agent, detail::assemble(agent, batch));
}

struct TrainStats {
  double critic_loss = 0.0;
  // -(1/n) sum Q(s||g, mu(s||g)), the quantity the actor minimizes.
  double actor_loss = 0.0;
};

struct LossGradient {
  double loss = 0.0;
  ParamGrads grads;
};

/// Gradient of (1/n) sum (y_i - Q(s_i||g_i, a_i))^2 w.r.t. the critic, with
/// the targets y treated as constants.
inline LossGradient critic_gradient(const DdpgAgent& agent, std::span<const Transition> batch,
                                    std::span<const double> targets) {
  if (batch.empty()) throw ShapeError("critic gradient needs a non-empty batch");
  if (targets.size() != batch.size()) throw ShapeError("one target per transition required");
  const auto m = detail::assemble(agent, batch);
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const ForwardResult q = mlp_forward(agent.critic, m.obs_action);
  Matrix dq(n, 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err = targets[i] - q.output(i, 0);
    loss += err * err;
    dq(i, 0) = -2.0 * err * inv_n;
  }
  return {loss * inv_n, mlp_backward(agent.critic, q.cache, dq).grads};
}

/// Gradient of -(1/n) sum Q(s_i||g_i, mu(s_i||g_i)) w.r.t. the actor; the
/// critic is only differentiated through, never updated.
inline LossGradient actor_gradient(const DdpgAgent& agent, std::span<const Transition> batch) {
  if (batch.empty()) throw ShapeError("actor gradient needs a non-empty batch");
  const auto m = detail::assemble(agent, batch);
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const ForwardResult pi = mlp_forward(agent.actor, m.obs);
  const ForwardResult q_pi = mlp_forward(agent.critic, detail::join_columns(m.obs, pi.output));
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) loss -= q_pi.output(i, 0);
  const Matrix d_obs_action = mlp_input_gradient(agent.critic, q_pi.cache, Matrix(n, 1, -inv_n));
  const std::size_t od = agent.obs_dim();
  Matrix d_action(n, agent.action_dim());
  for (std::size_t i = 0; i < n; ++i) {
    auto src = d_obs_action.row(i);
    std::copy(src.begin() + od, src.end(), d_action.row(i).begin());
  }
  return {loss * inv_n, mlp_backward(agent.actor, pi.cache, d_action).grads};
}

/// One optimization step on a minibatch. Both gradients are taken at the
/// current parameters, then the critic and actor each get one Adam step.
/// Returned losses are the pre-update values.
inline TrainStats train_step(DdpgAgent& agent, std::span<const Transition> batch) {
  if (batch.empty()) throw ShapeError("train_step needs a non-empty batch");
  const Vector y = critic_targets(agent, batch);
  LossGradient critic = critic_gradient(agent, batch, y);
  LossGradient actor = actor_gradient(agent, batch);
  if (!std::isfinite(critic.loss) || !std::isfinite(actor.loss)) {
    throw NumericError("non-finite loss (critic " + std::to_string(critic.loss) + ", actor " +
                       std::to_string(actor.loss) + ")");
  }
  adam_step(agent.critic, critic.grads, agent.critic_adam, agent.critic_lr);
  adam_step(agent.actor, actor.grads, agent.actor_adam, agent.actor_lr);
  return {critic.loss, actor.loss};
}

/// target <- tau * online + (1 - tau) * target, elementwise.
inline void soft_update_params(MlpParams& target, const MlpParams& online, double tau) {
  for (std::size_t li = 0; li < target.layers.size(); ++li) {
    auto tw = target.layers[li].weight.values();
    auto ow = online.layers[li].weight.values();
    for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = tau * ow[i] + (1.0 - tau) * tw[i];
    auto& tb = target.layers[li].bias;
    const auto& ob = online.layers[li].bias;
    for (std::size_t i = 0; i < tb.size(); ++i) tb[i] = tau * ob[i] + (1.0 - tau) * tb[i];
  }
}

inline void soft_update(DdpgAgent& agent) {
  soft_update_params(agent.target_actor, agent.actor, agent.tau);
  soft_update_params(agent.target_critic, agent.critic, agent.tau);
}

// Checkpoint: <path> holds the actor, critic, target actor and target critic
// snapshots back to back; <path>.json holds hyperparameters, step counters
// and any caller-supplied metadata.
inline void save_checkpoint(const std::string& path, const DdpgAgent& agent, nlohmann::json metadata = {}) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    write_snapshot(os, agent.actor);
    write_snapshot(os, agent.critic);
    write_snapshot(os, agent.target_actor);
    write_snapshot(os, agent.target_critic);
  }
  if (!metadata.is_object()) metadata = nlohmann::json::object();
  metadata["gamma"] = agent.gamma;
  metadata["tau"] = agent.tau;
  metadata["actor_lr"] = agent.actor_lr;
  metadata["critic_lr"] = agent.critic_lr;
  metadata["actor_adam_step"] = agent.actor_adam.step;
  metadata["critic_adam_step"] = agent.critic_adam.step;
  std::ofstream js(path + ".json");
  if (!js) throw Error("cannot open " + path + ".json for writing");
  js << metadata.dump(2) << '\n';
}

struct LoadedCheckpoint {
  DdpgAgent agent;
  nlohmann::json metadata;
};

/// Restores networks and hyperparameters. Adam moments are not stored and
/// come back zeroed; the step counters are restored.
inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path);
  MlpParams actor = read_snapshot(is);
  MlpParams critic = read_snapshot(is);
  MlpParams target_actor = read_snapshot(is);
  MlpParams target_critic = read_snapshot(is);
  std::ifstream js(path + ".json");
  if (!js) throw Error("missing checkpoint sidecar " + path + ".json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint sidecar: ") + e.what());
  }
  AgentHyperparams h{meta.value("gamma", 0.98), meta.value("tau", 0.001), meta.value("actor_lr", 1e-4),
                     meta.value("critic_lr", 1e-3)};
  DdpgAgent agent = DdpgAgent::from_networks(std::move(actor), std::move(critic), h);
  agent.target_actor = std::move(target_actor);
  agent.target_critic = std::move(target_critic);
  agent.actor_adam.step = meta.value("actor_adam_step", std::uint64_t{0});
  agent.critic_adam.step = meta.value("critic_adam_step", std::uint64_t{0});
  agent.validate();
  return {std::move(agent), std::move(meta)};
}

}  // namespace archer
