#include <gtest/gtest.h>

#include <cmath>

#include "hnav/perception/sensor.hpp"
#include "hnav/policy/policy_net.hpp"

using namespace hnav;
using namespace hnav::policy;

namespace {

PolicyNetConfig small() {
  PolicyNetConfig c;
  c.trunk_width = 16;
  c.trunk_layers = 2;
  c.stream_width = 8;
  c.stream_layers = 1;
  return c;
}

void zero_parameters(QNet& q) {
  for (nn::Param* p : q.params().all_params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
}

Transition transition(double reward, bool terminal, double fill) {
  Transition t;
  t.obs.fill(fill);
  t.next_obs.fill(fill);
  t.reward = reward;
  t.terminal = terminal;
  return t;
}

}  // namespace

TEST(Dueling, CombineSubtractsMeanAdvantage) {
  const QValues q = dueling_combine(2.0, {1.0, 2.0, 3.0, 6.0});
  EXPECT_EQ(q, (QValues{0.0, 1.0, 2.0, 5.0}));
}

TEST(Dueling, TiesGoToLowestIndex) {
  EXPECT_EQ(select_action({1.0, 1.0, 1.0, 1.0}), 0);
  EXPECT_EQ(select_action({0.0, 2.0, 2.0, 1.0}), 1);
  EXPECT_EQ(select_action({0.0, 0.0, 0.0, 0.1}), 3);
}

TEST(QNet, ForwardMatchesStreams) {
  const QNet q(small(), 4);
  nn::Matrix x = nn::Matrix::Random(3, kObservationSize);
  const auto [v, a] = q.streams(x, 11);
  const nn::Matrix out = q.forward(x, 11);
  for (Eigen::Index r = 0; r < 3; ++r) {
    const QValues want = dueling_combine(v(r, 0), {a(r, 0), a(r, 1), a(r, 2), a(r, 3)});
    for (Eigen::Index c = 0; c < 4; ++c) EXPECT_NEAR(out(r, c), want[c], 1e-12);
  }
  // noise changes the output, mean mode is reproducible
  EXPECT_NE(q.forward(x, 11), q.forward(x, 12));
  EXPECT_EQ(q.forward(x, std::nullopt), q.forward(x, std::nullopt));
}

TEST(QNet, ZeroParametersPickLeft) {
  QNet q(small(), 1);
  zero_parameters(q);
  Observation obs{};
  obs.fill(0.3);
  EXPECT_EQ(q.q_values(obs), (QValues{0.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(select_action(q.q_values(obs, 5)), 0);
}

TEST(QNet, ZeroParameterSpiralLeavesTheTrack) {
  QNet q(small(), 1);
  zero_parameters(q);
  sim::CourseConfig course;
  course.obstacle_count = 0;
  sim::World w(course);
  double prev_yaw = 0.0;
  while (w.running()) {
    Observation obs{};
    EXPECT_EQ(select_action(q.q_values(obs)), 0);
    w.step(sim::apply_action(sim::Action::Left, w.state(), w.dynamics()));
    if (w.running()) {
      EXPECT_NEAR(wrap_angle(w.state().yaw - prev_yaw), deg2rad(5.0), 1e-9);
      prev_yaw = w.state().yaw;
    }
  }
  EXPECT_EQ(w.outcome().classification, sim::Outcome::OutOfBounds);
}

TEST(Reward, ProgressAndPenalties) {
  sim::StepOutcome running;
  EXPECT_NEAR(reward(1.0, 1.25, running, 20.0), 0.25, 1e-15);
  sim::StepOutcome done;
  done.classification = sim::Outcome::Completed;
  EXPECT_NEAR(reward(99.9, 100.1, done, 20.0), 0.2, 1e-12);
  sim::StepOutcome hit;
  hit.classification = sim::Outcome::Collision;
  EXPECT_EQ(reward(5.0, 5.3, hit, 20.0), -20.0);
  hit.classification = sim::Outcome::OutOfBounds;
  EXPECT_EQ(reward(5.0, 5.3, hit, 30.0), -30.0);
}

TEST(Replay, FifoEviction) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push(transition(i, false, 0.0));
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.at(0).reward, 2.0);
  EXPECT_EQ(buf.at(2).reward, 4.0);
  Rng rng(1);
  for (const Transition& t : buf.sample(20, rng)) EXPECT_GE(t.reward, 2.0);
  EXPECT_THROW(ReplayBuffer(0), ConfigError);
}

TEST(Replay, StoresObservationsInSinglePrecision) {
  ReplayBuffer buf(2);
  Transition t = transition(1.0, true, 0.1);
  t.action = 3;
  buf.push(t);
  const Transition back = buf.at(0);
  EXPECT_EQ(back.action, 3);
  EXPECT_TRUE(back.terminal);
  EXPECT_EQ(back.obs[7], static_cast<double>(0.1f));
}

TEST(TdTargets, BootstrapOnlyWhenNotTerminal) {
  QNet target(small(), 2);
  const std::vector<Transition> batch = {transition(1.0, false, 0.2), transition(-20.0, true, 0.2)};
  const auto y = td_targets(batch, target, 0.99);
  const QValues q_next = target.q_values(batch[0].next_obs);
  EXPECT_NEAR(y[0], 1.0 + 0.99 * *std::max_element(q_next.begin(), q_next.end()), 1e-12);
  EXPECT_EQ(y[1], -20.0);
}

TEST(TdTargets, UpdateReducesLossOnFixedBatch) {
  QNet online(small(), 3), target(small(), 3);
  std::vector<Transition> batch;
  for (int i = 0; i < 8; ++i) {
    Transition t = transition(0.1 * i, i % 3 == 0, 0.05 * i);
    t.action = i % 4;
    batch.push_back(t);
  }
  nn::AdamConfig adam;
  adam.learning_rate = 1e-3;
  const double first = dqn_update(online, target, batch, 0.99, adam, std::nullopt);
  double last = first;
  for (int k = 0; k < 50; ++k) last = dqn_update(online, target, batch, 0.99, adam, std::nullopt);
  EXPECT_LT(last, first);
}

TEST(Observation, DepthThenScaledKinematics) {
  perception::DepthMap d(9, 16, 0.25, perception::Resolution::Reduced, perception::DepthUnits::Normalized);
  sim::KinematicEstimate k{};
  k.fill(1.0);
  const Observation o = make_observation(d, k);
  EXPECT_EQ(o[0], 0.25);
  EXPECT_EQ(o[kDepthCells - 1], 0.25);
  for (std::size_t i = 0; i < sim::kKinematicSize; ++i)
    EXPECT_NEAR(o[kDepthCells + i], 1.0 / kinematic_scale()[i], 1e-15);
  perception::DepthMap wrong(9, 16, 10.0, perception::Resolution::Reduced, perception::DepthUnits::Meters);
  EXPECT_THROW(make_observation(wrong, k), ConfigError);
}

TEST(PolicyConfig, Validation) {
  PolicyTrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(PolicyTraining, ReturnsTheBestHeldOutSnapshot) {
  QNet q(small(), 3);
  perception::OracleDepthSensor sensor;
  RolloutSetup setup;
  setup.sensor = &sensor;
  setup.course.obstacle_count = 4;
  PolicyTrainConfig t;
  t.total_steps = 450;
  t.learning_starts = 100;
  t.batch_size = 8;
  t.replay_capacity = 500;
  t.target_sync = 50;
  t.adam.learning_rate = 1e-3;
  t.select_every = 150;
  t.select_episodes = 2;
  std::vector<PolicySelectionLog> picks;
  train_policy(q, setup, t, {}, &picks);
  ASSERT_EQ(picks.size(), 3u);
  EXPECT_TRUE(picks.front().best);
  const PolicySelectionLog* best = nullptr;
  for (const auto& p : picks)
    if (p.best) best = &p;
  const auto again = evaluate_greedy(q, setup, t.kinematic_sigma, t.seed, t.select_episodes);
  EXPECT_EQ(again.completions, best->completions);
  EXPECT_DOUBLE_EQ(again.mean_progress, best->mean_progress);
}
