#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "archer/replay.hpp"

using namespace archer;

namespace {

Transition tagged(double tag) {
  Transition t;
  t.state = {tag, 0, 0, 0};
  t.goal = {0, 0};
  t.action = {0, 0};
  t.next_state = {tag, 0, 0, 0};
  t.reward = -tag;
  return t;
}

// A random-walk point-mass episode with real goal `goal`.
Episode random_episode(Rng& rng, std::size_t T, double step_scale = 0.1) {
  std::uniform_real_distribution<double> u(-1, 1);
  Episode ep;
  Vector pos{u(rng), u(rng)};
  const Vector goal{u(rng), u(rng)};
  for (std::size_t t = 0; t < T; ++t) {
    Transition tr;
    tr.state = {pos[0], pos[1], 0, 0};
    tr.goal = goal;
    tr.action = {u(rng), u(rng)};
    const Vector next{pos[0] + step_scale * tr.action[0], pos[1] + step_scale * tr.action[1]};
    tr.next_state = {next[0], next[1], step_scale * tr.action[0], step_scale * tr.action[1]};
    tr.reward = base_reward(RewardKind::binary_negative, next, goal, 0.05);
    ep.transitions.push_back(tr);
    ep.achieved_goals.push_back(next);
    pos = next;
  }
  return ep;
}

bool same_bytes(const Vector& a, const Vector& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(ReplayBuffer, EmptyHasSizeZero) {
  ReplayBuffer b(5);
  EXPECT_EQ(b.size(), 0u);
  EXPECT_TRUE(b.empty());
  Rng rng(1);
  EXPECT_THROW(b.sample_minibatch(1, rng), NotReadyError);
}

TEST(ReplayBuffer, FifoEviction) {
  ReplayBuffer b(3);
  for (int i = 1; i <= 4; ++i) b.push(tagged(i));
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b.at(0).state[0], 2.0);
  EXPECT_EQ(b.at(1).state[0], 3.0);
  EXPECT_EQ(b.at(2).state[0], 4.0);
  EXPECT_EQ(b.evictions(), 1u);
}

TEST(ReplayBuffer, SizeMonotoneAndCapped) {
  ReplayBuffer b(7);
  std::size_t prev = 0;
  for (int i = 0; i < 30; ++i) {
    b.push(tagged(i));
    ASSERT_GE(b.size(), prev);
    ASSERT_LE(b.size(), 7u);
    prev = b.size();
    if (b.total_pushes() >= 7) {
      ASSERT_EQ(b.evictions(), b.total_pushes() - 7);
    }
  }
}

TEST(ReplayBuffer, SamplesOnlyStoredItems) {
  ReplayBuffer b(10);
  b.push(tagged(1));
  b.push(tagged(2));
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double tag = b.sample_minibatch(1, rng)[0].state[0];
    ASSERT_TRUE(tag == 1.0 || tag == 2.0);
  }
}

TEST(ReplayBuffer, SingleItemFillsWholeBatch) {
  ReplayBuffer b(10);
  b.push(tagged(7));
  Rng rng(4);
  const auto batch = b.sample_minibatch(128, rng);
  ASSERT_EQ(batch.size(), 128u);
  for (const auto& t : batch) ASSERT_EQ(t, tagged(7));
}

// Binomial(1e5, 0.5) has standard deviation 158, i.e. 0.0016 in frequency;
// 0.02 is more than ten standard deviations.
TEST(ReplayBuffer, UniformOverTwoItems) {
  ReplayBuffer b(10);
  b.push(tagged(1));
  b.push(tagged(2));
  Rng rng(5);
  std::size_t ones = 0;
  const std::size_t n = 100000;
  for (const auto& t : b.sample_minibatch(n, rng)) ones += t.state[0] == 1.0;
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.5, 0.02);
}

TEST(ReplayBuffer, FixedSeedGivesIdenticalBatches) {
  ReplayBuffer b(100);
  for (int i = 0; i < 50; ++i) b.push(tagged(i));
  Rng r1(9), r2(9);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(b.sample_minibatch(16, r1), b.sample_minibatch(16, r2));
}

TEST(ReplayBuffer, CsvDump) {
  ReplayBuffer b(4);
  Transition t = tagged(1.5);
  t.is_hindsight = true;
  b.push(t);
  std::ostringstream os;
  b.dump_csv(os);
  EXPECT_EQ(os.str(),
            "state0,state1,state2,state3,goal0,goal1,action0,action1,reward,"
            "next_state0,next_state1,next_state2,next_state3,is_hindsight\n"
            "1.5,0,0,0,0,0,0,0,-1.5,1.5,0,0,0,1\n");
}

TEST(RelabelFinal, LastTransitionSucceeds) {
  Rng rng(10);
  for (RewardKind kind : {RewardKind::binary_negative, RewardKind::binary_positive, RewardKind::shaped}) {
    const Episode ep = random_episode(rng, 50);
    const auto h = relabel_final(ep, kind, {1.0, 1.0}, 0.05);
    ASSERT_EQ(h.size(), 50u);
    EXPECT_EQ(h.back().reward, kind == RewardKind::binary_positive ? 1.0 : 0.0);
    EXPECT_TRUE(h.back().success);
    for (const auto& t : h) EXPECT_EQ(t.goal, ep.achieved_goals.back());
  }
}

TEST(RelabelFinal, StationaryEpisodeIsAllSuccess) {
  Rng rng(11);
  const Episode ep = random_episode(rng, 50, 0.0);
  for (const auto& t : relabel_final(ep, RewardKind::binary_negative, {1.0, 1.0}, 0.05)) {
    EXPECT_EQ(t.reward, 0.0);
  }
}

TEST(RelabelFinal, WeightsUnsuccessfulHindsightSteps) {
  Rng rng(12);
  Episode ep = random_episode(rng, 50, 0.1);
  ep.achieved_goals.front() = {5.0, 5.0};  // far from the final achieved goal
  const auto h = relabel_final(ep, RewardKind::binary_negative, {1.0, 0.5}, 0.05);
  EXPECT_EQ(h.front().reward, -0.5);
  EXPECT_TRUE(h.front().is_hindsight);
}

TEST(RelabelFuture, CountsAndGoalsFromTheFuture) {
  Rng rng(13);
  const Episode ep = random_episode(rng, 50);
  const auto h = relabel_future(ep, 4, RewardKind::binary_negative, {1.0, 1.0}, 0.05, rng);
  ASSERT_EQ(h.size(), 200u);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::size_t t = i / 4;
    bool found = false;
    for (std::size_t j = t; j < 50 && !found; ++j) found = h[i].goal == ep.achieved_goals[j];
    ASSERT_TRUE(found) << "entry " << i;
  }
  // The last step can only be relabeled with its own achieved goal.
  for (std::size_t i = 196; i < 200; ++i) {
    EXPECT_EQ(h[i].goal, ep.achieved_goals.back());
    EXPECT_EQ(h[i].reward, 0.0);
  }
}

TEST(RelabelFuture, RejectsZeroK) {
  Rng rng(14);
  const Episode ep = random_episode(rng, 5);
  EXPECT_THROW(relabel_future(ep, 0, RewardKind::binary_negative, {1, 1}, 0.05, rng), ConfigError);
}

TEST(Relabel, NeverTouchesStateActionNextState) {
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const Episode ep = random_episode(rng, 20);
    const auto fin = relabel_final(ep, RewardKind::shaped, {2.0, 0.5}, 0.05);
    const auto fut = relabel_future(ep, 3, RewardKind::shaped, {2.0, 0.5}, 0.05, rng);
    for (std::size_t i = 0; i < fin.size(); ++i) {
      ASSERT_TRUE(same_bytes(fin[i].state, ep.transitions[i].state));
      ASSERT_TRUE(same_bytes(fin[i].action, ep.transitions[i].action));
      ASSERT_TRUE(same_bytes(fin[i].next_state, ep.transitions[i].next_state));
    }
    for (std::size_t i = 0; i < fut.size(); ++i) {
      const auto& src = ep.transitions[i / 3];
      ASSERT_TRUE(same_bytes(fut[i].state, src.state));
      ASSERT_TRUE(same_bytes(fut[i].action, src.action));
      ASSERT_TRUE(same_bytes(fut[i].next_state, src.next_state));
    }
  }
}

// Dividing a stored reward by lambda_h recovers the task reward for the new goal.
TEST(Relabel, StoredRewardCarriesHindsightWeight) {
  Rng rng(16);
  const TradeOff t{0.5, 2.0};
  const Episode ep = random_episode(rng, 30);
  const auto h = relabel_future(ep, 2, RewardKind::shaped, t, 0.05, rng);
  for (std::size_t i = 0; i < h.size(); ++i) {
    ASSERT_TRUE(h[i].is_hindsight);
    const double base = base_reward(RewardKind::shaped, ep.achieved_goals[i / 2], h[i].goal, 0.05);
    ASSERT_EQ(h[i].reward / t.lambda_h, base);
  }
}

TEST(Relabel, MisalignedEpisodeThrows) {
  Rng rng(17);
  Episode ep = random_episode(rng, 5);
  ep.achieved_goals.pop_back();
  EXPECT_THROW(relabel_final(ep, RewardKind::shaped, {1, 1}, 0.05), ShapeError);
}
