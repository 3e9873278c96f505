#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hnav/nn/model.hpp"
#include "hnav/perception/sensor.hpp"
#include "hnav/sim/world.hpp"

namespace hnav::policy {

inline constexpr std::size_t kDepthCells = 144;
inline constexpr std::size_t kObservationSize = kDepthCells + sim::kKinematicSize;

/// Reduced normalized depth (row-major) followed by the scaled kinematic
/// estimate.
using Observation = std::array<double, kObservationSize>;

/// Per-channel divisors applied to the kinematic estimate so every input is
/// O(1): lateral position by track half-width, speeds by cruise speed, etc.
const std::array<double, sim::kKinematicSize>& kinematic_scale();

Observation make_observation(const perception::DepthMap& reduced_normalized, const sim::KinematicEstimate& kin);

/// Sense the world: depth from `sensor`, kinematics with additive noise.
Observation observe(const sim::VehicleState& state, const perception::Scene& scene,
                    const perception::DepthSensor& sensor, double kinematic_sigma, std::uint64_t seed,
                    perception::DepthMap* depth_out = nullptr);

struct PolicyNetConfig {
  std::size_t trunk_width = 128;
  std::size_t trunk_layers = 3;
  std::size_t stream_width = 128;
  std::size_t stream_layers = 2;
  double sigma0 = 0.5;  // noisy-layer sigma init, scaled by 1/sqrt(fan in)
  void validate() const;
};

using QValues = std::array<double, sim::kActionCount>;

/// Q = V + A - mean(A).
QValues dueling_combine(double value, const std::array<double, sim::kActionCount>& advantage);

/// Argmax, ties to the lowest index (Left, Forward, Right, Reverse).
int select_action(const QValues& q);

/// Dueling Q-network: shared ReLU trunk, value and advantage streams, each
/// ending in a noisy-dense layer.
class QNet : public nn::Model {
 public:
  explicit QNet(const PolicyNetConfig& config = {}, std::uint64_t seed = 0);
  QNet(const PolicyNetConfig& config, nn::NetworkParams params);

  /// Rows of `x` are observations; returns B x 4 Q-values. One noise draw
  /// per call when a seed is given; without one the noisy layers use their
  /// means.
  nn::Matrix forward(const nn::Matrix& x, std::optional<std::uint64_t> noise_seed) const;
  QValues q_values(const Observation& obs, std::optional<std::uint64_t> noise_seed = std::nullopt) const;
  /// Value and advantage heads separately (B x 1, B x 4).
  std::pair<nn::Matrix, nn::Matrix> streams(const nn::Matrix& x, std::optional<std::uint64_t> noise_seed) const;

  nn::NetworkParams& params() override { return params_; }
  const nn::NetworkParams& params() const override { return params_; }
  std::vector<double> accumulate_gradients(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                                           std::optional<std::uint64_t> noise_seed) override;
  std::vector<double> losses(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                             std::optional<std::uint64_t> noise_seed) const override;
  const PolicyNetConfig& config() const { return config_; }

 private:
  std::size_t value_begin() const { return config_.trunk_layers; }
  std::size_t advantage_begin() const { return config_.trunk_layers + config_.stream_layers + 1; }
  std::size_t layer_end() const { return params_.layers.size(); }

  PolicyNetConfig config_;
  nn::NetworkParams params_;
};

/// r = new_x - prev_x while running or completed; -lambda on collision or
/// out-of-bounds.
double reward(double prev_x, double new_x, const sim::StepOutcome& outcome, double lambda);

struct Transition {
  Observation obs{};
  int action = 0;
  double reward = 0.0;
  Observation next_obs{};
  bool terminal = false;
};

/// Fixed-capacity FIFO replay memory. Observations are stored in single
/// precision to keep 100k transitions within ~130 MB.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  Transition at(std::size_t i) const;  // 0 = oldest
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::vector<float> obs_;
  std::vector<float> next_obs_;
  std::vector<std::int8_t> action_;
  std::vector<double> reward_;
  std::vector<std::uint8_t> terminal_;
};

/// Regression targets r + gamma * max_a' Q_target(s', a'), with no
/// bootstrap on terminal transitions. The target network runs at its means.
std::vector<double> td_targets(std::span<const Transition> batch, const QNet& target, double gamma);

/// One optimizer step on the squared TD error. Returns the pre-update loss.
double dqn_update(QNet& online, const QNet& target, std::span<const Transition> batch, double gamma,
                  const nn::AdamConfig& adam, std::optional<std::uint64_t> noise_seed, std::int64_t step = 0);

struct PolicyTrainConfig {
  std::size_t total_steps = 200000;
  std::size_t learning_starts = 2000;
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 100000;
  std::size_t target_sync = 1000;
  double gamma = 0.99;
  double lambda = 20.0;
  double kinematic_sigma = 0.02;
  nn::AdamConfig adam{1e-4, 0.9, 0.999, 1e-8, 10.0};
  std::uint64_t seed = 1;
  /// Every `select_every` steps the greedy policy flies `select_episodes`
  /// held-out courses; the best snapshot is what training returns. 0 keeps
  /// the final weights.
  std::size_t select_every = 10000;
  std::size_t select_episodes = 16;
  void validate() const;
};

/// One held-out greedy evaluation during training.
struct PolicySelectionLog {
  std::size_t total_steps = 0;
  std::size_t completions = 0;
  std::size_t episodes = 0;
  double mean_progress = 0.0;  // final x, meters
  bool best = false;
};

struct PolicyEpisodeLog {
  std::size_t episode = 0;
  double episode_return = 0.0;
  sim::Outcome outcome = sim::Outcome::Running;
  int steps = 0;
  double lambda = 0.0;
  std::size_t total_steps = 0;
  double mean_td_loss = 0.0;
};

struct RolloutSetup {
  sim::CourseConfig course;
  sim::DynamicsConfig dynamics;
  const perception::DepthSensor* sensor = nullptr;
  bool side_walls = false;
};

using PolicyEpisodeCallback = std::function<void(const PolicyEpisodeLog&)>;

/// Noisy-net DQN over simulator episodes. Episode k flies the course seeded
/// mix_seed(config.seed, k); timeouts end an episode without cutting the
/// bootstrap.
std::vector<PolicyEpisodeLog> train_policy(QNet& net, const RolloutSetup& setup, const PolicyTrainConfig& config,
                                           const PolicyEpisodeCallback& on_episode = {},
                                           std::vector<PolicySelectionLog>* selections = nullptr);

/// Greedy (noise-free) flights over courses seeded mix_seed(seed, tag, i).
PolicySelectionLog evaluate_greedy(const QNet& net, const RolloutSetup& setup, double kinematic_sigma,
                                   std::uint64_t seed, std::size_t episodes);

void write_policy_log_csv(const std::vector<PolicyEpisodeLog>& log, const std::filesystem::path& path);

}  // namespace hnav::policy
