#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hnav/nn/model.hpp"
#include "hnav/policy/policy_net.hpp"

namespace hnav::collision {

struct CollisionNetConfig {
  std::vector<std::size_t> encoder = {256, 256, 128, 32};  // after the 160-wide input
  std::vector<std::size_t> head = {32, 32, 32};            // after the 32 + 4 join
  double leak = nn::kDefaultLeak;
  int horizon = 10;
  double threshold = 0.5;
  double positive_fraction = 0.25;
  void validate() const;
};

/// Observation encoder, one-hot action join, classifier head; two logits
/// with class 0 = collision within the horizon.
class CollisionNet : public nn::Model {
 public:
  explicit CollisionNet(const CollisionNetConfig& config = {}, std::uint64_t seed = 0);
  CollisionNet(const CollisionNetConfig& config, nn::NetworkParams params);

  /// Sample inputs are 164 long: observation then the action one-hot.
  nn::Matrix logits(const nn::Matrix& x) const;
  /// Softmax probability of the collision class.
  double predict(const policy::Observation& obs, int action) const;
  std::size_t join_width() const { return config_.encoder.back() + sim::kActionCount; }

  nn::NetworkParams& params() override { return params_; }
  const nn::NetworkParams& params() const override { return params_; }
  std::vector<double> accumulate_gradients(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                                           std::optional<std::uint64_t> noise_seed) override;
  std::vector<double> losses(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                             std::optional<std::uint64_t> noise_seed) const override;
  const CollisionNetConfig& config() const { return config_; }

 private:
  std::size_t encoder_layers() const { return config_.encoder.size(); }

  CollisionNetConfig config_;
  nn::NetworkParams params_;
};

inline constexpr std::size_t kCollisionInputSize = policy::kObservationSize + sim::kActionCount;

/// Probability of class 0 from a pair of logits.
double collision_probability(double logit_collision, double logit_clear);

/// `collided[k]` says whether the step that produced step index k ended in a
/// collision (entry 0 is unused). Returns one label per decision frame
/// t = 0 .. n-1: positive iff a collision happens at some step in (t, t+horizon].
std::vector<std::uint8_t> label_window(std::span<const std::uint8_t> collided, int horizon);

/// Decision frames of one finished episode.
struct EpisodeFrames {
  std::vector<policy::Observation> observations;  // frame t, seen before step t+1
  std::vector<int> actions;                       // action taken at frame t
  sim::Outcome outcome = sim::Outcome::Running;
  int steps = 0;
};

/// Flat labeled container. Observations are stored in single precision.
struct CollisionDataset {
  int horizon = 10;
  std::string generator;  // e.g. "rl-policy" or "straight-line"
  std::uint64_t seed = 0;
  std::vector<float> observations;  // size() x 160
  std::vector<std::int8_t> actions;
  std::vector<std::uint8_t> labels;  // 1 = collision within horizon
  std::vector<std::uint32_t> episodes;

  std::size_t size() const { return labels.size(); }
  std::size_t positives() const;
  void add_episode(const EpisodeFrames& frames, std::uint32_t episode_id);
  policy::Observation observation(std::size_t i) const;
  nn::Sample sample(std::size_t i) const;
};

/// Labels every frame of a finished episode.
std::vector<std::uint8_t> label_episode(const EpisodeFrames& frames, int horizon);

void save_collision_dataset(const CollisionDataset& data, const std::filesystem::path& stem);
CollisionDataset load_collision_dataset(const std::filesystem::path& stem);

/// Index pool split by class.
struct ClassPool {
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
};

ClassPool make_pool(const CollisionDataset& data, std::span<const std::size_t> indices);

/// round(fraction * batch) positives, the rest negatives, each drawn with
/// replacement. Throws DataError if either class is empty.
std::vector<std::size_t> sample_balanced_batch(const ClassPool& pool, std::size_t batch_size, std::uint64_t seed,
                                               double positive_fraction = 0.25);

/// Episode-level train/validation split so near-duplicate consecutive
/// frames never straddle the two sets.
struct CollisionSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
CollisionSplit split_by_episode(const CollisionDataset& data, double validation_fraction, std::uint64_t seed);

struct CollisionSchedule {
  std::size_t batches = 30000;
  std::size_t batch_size = 32;
  nn::AdamConfig adam{};
  double validation_fraction = 0.1;
  std::size_t validation_batches = 300;
  std::size_t log_every = 1000;
  std::uint64_t seed = 0;
};

struct CollisionReport {
  std::size_t batches = 0;
  std::size_t frames = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double cross_entropy = 0.0;
  // fractions of all evaluated frames
  double tp_mass = 0.0, tn_mass = 0.0, fp_mass = 0.0, fn_mass = 0.0;
  // conditional rates
  double tp_rate = 0.0, tn_rate = 0.0, fp_rate = 0.0, fn_rate = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
};

/// Confusion-matrix summary; positive prediction iff p > threshold.
CollisionReport summarize(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn, double ce_sum);

/// Balanced validation batches (24 clear + 8 collision frames at batch 32).
CollisionReport validate_collision(const CollisionNet& net, const CollisionDataset& data, const ClassPool& pool,
                                   std::size_t batches, std::size_t batch_size, std::uint64_t seed);

struct CollisionLogEntry {
  std::size_t batch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_cross_entropy = 0.0;
};

struct CollisionTrainResult {
  std::vector<CollisionLogEntry> log;
  CollisionReport validation;
  std::size_t train_frames = 0;
  std::size_t validation_frames = 0;
};

CollisionTrainResult train_collision(CollisionNet& net, const CollisionDataset& data, const CollisionSchedule& schedule,
                                     const std::function<void(const CollisionLogEntry&)>& on_log = {});

std::string report_json(const CollisionReport& report, int indent = 2);

}  // namespace hnav::collision
