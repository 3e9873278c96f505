#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "hnav/collision/collision_net.hpp"

using namespace hnav;
using namespace hnav::collision;

namespace {

EpisodeFrames episode(int steps, sim::Outcome outcome, double fill) {
  EpisodeFrames f;
  f.steps = steps;
  f.outcome = outcome;
  for (int t = 0; t < steps; ++t) {
    policy::Observation o{};
    o.fill(fill + 0.001 * t);
    f.observations.push_back(o);
    f.actions.push_back(t % 4);
  }
  return f;
}

}  // namespace

TEST(Labels, WindowMatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(60));
    const int horizon = 1 + static_cast<int>(rng.index(15));
    std::vector<std::uint8_t> collided(static_cast<std::size_t>(n) + 1, 0);
    for (int k = 1; k <= n; ++k) collided[k] = rng.uniform() < 0.05;
    const auto labels = label_window(collided, horizon);
    ASSERT_EQ(labels.size(), static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      bool want = false;
      for (int k = t + 1; k <= std::min(n, t + horizon); ++k) want = want || collided[k];
      ASSERT_EQ(labels[t], want) << "t=" << t << " n=" << n << " h=" << horizon;
    }
  }
}

TEST(Labels, LastTenFramesBeforeACrash) {
  const auto crash = label_episode(episode(30, sim::Outcome::Collision, 0.0), 10);
  for (int t = 0; t < 30; ++t) EXPECT_EQ(crash[t], t >= 20) << t;
  const auto clean = label_episode(episode(30, sim::Outcome::OutOfBounds, 0.0), 10);
  for (auto l : clean) EXPECT_EQ(l, 0);
}

TEST(Dataset, AddEpisodeAndRoundTrip) {
  CollisionDataset d;
  d.generator = "straight-line";
  d.seed = 5;
  d.add_episode(episode(15, sim::Outcome::Collision, 0.1), 0);
  d.add_episode(episode(8, sim::Outcome::Completed, -0.2), 1);
  EXPECT_EQ(d.size(), 23u);
  EXPECT_EQ(d.positives(), 10u);
  const nn::Sample s = d.sample(3);
  ASSERT_EQ(s.input.size(), kCollisionInputSize);
  EXPECT_EQ(s.input[policy::kObservationSize + 3], 1.0);  // action 3 one-hot
  EXPECT_EQ(s.target.data, (std::vector<double>{0.0, 1.0}));  // clear frame

  const auto dir = std::filesystem::temp_directory_path() / "hnav_collision_test";
  std::filesystem::create_directories(dir);
  save_collision_dataset(d, dir / "frames");
  const CollisionDataset back = load_collision_dataset(dir / "frames");
  EXPECT_EQ(back.observations, d.observations);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.actions, d.actions);
  EXPECT_EQ(back.episodes, d.episodes);
  EXPECT_EQ(back.generator, "straight-line");
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_collision_dataset(dir / "frames"), ArtifactError);
}

TEST(Batches, BalancedComposition) {
  CollisionDataset d;
  for (std::uint32_t e = 0; e < 6; ++e) d.add_episode(episode(20, sim::Outcome::Collision, 0.0), e);
  std::vector<std::size_t> all(d.size());
  std::iota(all.begin(), all.end(), 0);
  const ClassPool pool = make_pool(d, all);
  EXPECT_EQ(pool.positive.size(), 60u);
  EXPECT_EQ(pool.negative.size(), 60u);
  const auto batch = sample_balanced_batch(pool, 32, 1);
  std::size_t pos = 0;
  for (auto i : batch) pos += d.labels[i];
  EXPECT_EQ(pos, 8u);
  EXPECT_EQ(batch, sample_balanced_batch(pool, 32, 1));
  ClassPool empty;
  empty.negative = pool.negative;
  EXPECT_THROW(sample_balanced_batch(empty, 32, 1), DataError);
}

TEST(Split, EpisodesNeverStraddle) {
  CollisionDataset d;
  for (std::uint32_t e = 0; e < 20; ++e) d.add_episode(episode(5 + e, sim::Outcome::Collision, 0.0), e);
  const CollisionSplit s = split_by_episode(d, 0.2, 9);
  std::set<std::uint32_t> train_eps, val_eps;
  for (auto i : s.train) train_eps.insert(d.episodes[i]);
  for (auto i : s.validation) val_eps.insert(d.episodes[i]);
  for (auto e : val_eps) EXPECT_FALSE(train_eps.count(e));
  EXPECT_EQ(s.train.size() + s.validation.size(), d.size());
  EXPECT_EQ(val_eps.size(), 4u);
}

TEST(Report, ConfusionSummary) {
  const CollisionReport r = summarize(8, 80, 2, 10, 0.0);
  EXPECT_EQ(r.frames, 100u);
  EXPECT_NEAR(r.accuracy, 0.88, 1e-12);
  EXPECT_NEAR(r.precision, 0.8, 1e-12);
  EXPECT_NEAR(r.recall, 8.0 / 18.0, 1e-12);
  EXPECT_NEAR(r.tp_mass + r.tn_mass + r.fp_mass + r.fn_mass, 1.0, 1e-12);
  EXPECT_NEAR(r.tp_rate + r.fn_rate, 1.0, 1e-12);
  EXPECT_NEAR(r.tn_rate + r.fp_rate, 1.0, 1e-12);
}

TEST(Net, ProbabilityIsSoftmaxOfCollisionLogit) {
  EXPECT_NEAR(collision_probability(0.0, 0.0), 0.5, 1e-15);
  EXPECT_NEAR(collision_probability(2.0, 0.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(collision_probability(800.0, 0.0), 1.0, 1e-15);
  const CollisionNet net({}, 2);
  policy::Observation o{};
  const double p = net.predict(o, 1);
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
  EXPECT_EQ(net.params().layers.front().weights().shape, (nn::Shape{256, policy::kObservationSize}));
}

TEST(Net, LearnsASeparableToy) {
  // collision iff the first depth cell is near: tiny nets should get this
  CollisionDataset d;
  Rng rng(4);
  for (std::uint32_t e = 0; e < 40; ++e) {
    const bool crash = e % 2 == 0;
    EpisodeFrames f = episode(12, crash ? sim::Outcome::Collision : sim::Outcome::Completed, 0.0);
    for (int t = 0; t < 12; ++t) f.observations[t][0] = (crash && t >= 2) ? -0.9 : 0.9 + 0.01 * rng.normal();
    d.add_episode(f, e);
  }
  CollisionNetConfig cfg;
  cfg.encoder = {16, 8};
  cfg.head = {8};
  CollisionNet net(cfg, 1);
  CollisionSchedule sched;
  sched.batches = 400;
  sched.validation_batches = 20;
  sched.log_every = 100;
  sched.adam.learning_rate = 3e-3;
  sched.validation_fraction = 0.25;
  const CollisionTrainResult r = train_collision(net, d, sched);
  EXPECT_GE(r.validation.accuracy, 0.95);
  EXPECT_EQ(r.log.size(), 4u);
}
