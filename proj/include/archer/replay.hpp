#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "archer/envs.hpp"
#include "archer/errors.hpp"
#include "archer/numcore.hpp"
#include "archer/rewards.hpp"
#include "archer/rng.hpp"

namespace archer {

/// One stored experience. The network sees state||goal and next_state||goal;
/// `reward` already carries its trade-off weight.
struct Transition {
  Vector state;
  Vector goal;
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool is_hindsight = false;
  bool success = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Real transitions of one episode; achieved_goals[t] is the goal achieved by
/// next_state of transitions[t].
struct Episode {
  std::vector<Transition> transitions;
  std::vector<Vector> achieved_goals;

  std::size_t length() const noexcept { return transitions.size(); }
};

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
class ReplayBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 100'000;

  explicit ReplayBuffer(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay buffer capacity must be positive");
    storage_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
  }

  void push(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
    ++total_pushes_;
  }

  std::size_t size() const noexcept { return storage_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return storage_.empty(); }
  std::size_t total_pushes() const noexcept { return total_pushes_; }
  std::size_t evictions() const noexcept { return total_pushes_ - storage_.size(); }

  /// Entry i in insertion order; 0 is the oldest transition still held.
  const Transition& at(std::size_t i) const {
    if (i >= storage_.size()) throw std::out_of_range("replay buffer index out of range");
    const std::size_t oldest = storage_.size() < capacity_ ? 0 : cursor_;
    return storage_[(oldest + i) % capacity_];
  }

  /// `n` transitions drawn uniformly with replacement.
  std::vector<Transition> sample_minibatch(std::size_t n, Rng& rng) const {
    if (storage_.empty()) throw NotReadyError("cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(storage_[pick(rng)]);
    return batch;
  }

  /// Debug dump: one row per transition in insertion order.
  void dump_csv(std::ostream& os) const {
    if (storage_.empty()) return;
    const auto& first = at(0);
    auto header = [&](const char* name, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) os << name << i << ',';
    };
    header("state", first.state.size());
    header("goal", first.goal.size());
    header("action", first.action.size());
    os << "reward,";
    header("next_state", first.next_state.size());
    os << "is_hindsight\n";
    char buf[64];
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf << ',';
    };
    for (std::size_t i = 0; i < size(); ++i) {
      const auto& t = at(i);
      for (double v : t.state) put(v);
      for (double v : t.goal) put(v);
      for (double v : t.action) put(v);
      put(t.reward);
      for (double v : t.next_state) put(v);
      os << (t.is_hindsight ? 1 : 0) << '\n';
    }
  }

  void dump_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    dump_csv(os);
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
  std::size_t total_pushes_ = 0;
};

namespace detail {

inline Transition hindsight_copy(const Transition& src, const Vector& achieved, const Vector& new_goal,
                                 RewardKind kind, const TradeOff& tradeoff, double tolerance) {
  Transition h;
  h.state = src.state;
  h.goal = new_goal;
  h.action = src.action;
  h.next_state = src.next_state;
  h.reward = weighted_reward(tradeoff, true, base_reward(kind, achieved, new_goal, tolerance));
  h.is_hindsight = true;
  h.success = goal_distance(achieved, new_goal) <= tolerance;
  return h;
}

inline void check_episode(const Episode& ep) {
  if (ep.transitions.empty()) throw ShapeError("episode has no transitions");
  if (ep.achieved_goals.size() != ep.transitions.size()) {
    throw ShapeError("achieved-goal list is not aligned with the episode transitions");
  }
}

}  // namespace detail

/// One hindsight copy per step, all relabeled with the episode's final achieved goal.
inline std::vector<Transition> relabel_final(const Episode& ep, RewardKind kind, const TradeOff& tradeoff,
                                             double tolerance) {
  detail::check_episode(ep);
  const Vector& final_goal = ep.achieved_goals.back();
  std::vector<Transition> out;
  out.reserve(ep.length());
  for (std::size_t t = 0; t < ep.length(); ++t) {
    out.push_back(detail::hindsight_copy(ep.transitions[t], ep.achieved_goals[t], final_goal, kind, tradeoff,
                                         tolerance));
  }
  return out;
}

/// `k` hindsight copies per step, each relabeled with the achieved goal of a
/// step drawn uniformly from {t, ..., T-1}. Output is grouped by step: entries
/// [k*t, k*t + k) belong to step t.
inline std::vector<Transition> relabel_future(const Episode& ep, std::size_t k, RewardKind kind,
                                              const TradeOff& tradeoff, double tolerance, Rng& rng) {
  detail::check_episode(ep);
  if (k == 0) throw ConfigError("future strategy needs k >= 1");
  const std::size_t T = ep.length();
  std::vector<Transition> out;
  out.reserve(k * T);
  for (std::size_t t = 0; t < T; ++t) {
    std::uniform_int_distribution<std::size_t> pick(t, T - 1);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = pick(rng);
      out.push_back(detail::hindsight_copy(ep.transitions[t], ep.achieved_goals[t], ep.achieved_goals[j], kind,
                                           tradeoff, tolerance));
    }
  }
  return out;
}

}  // namespace archer
