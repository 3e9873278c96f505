#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "hnav/harness/evaluation.hpp"
#include "hnav/perception/dataset.hpp"

namespace hnav::harness {

/// Trained depth network as the observation channel: render RGB, predict the
/// reduced map, clamp to [-1, 1]. The seed is unused.
class DepthNetSensor : public perception::DepthSensor {
 public:
  DepthNetSensor(const depth::DepthNet& net, const perception::CameraModel& camera) : net_(net), camera_(camera) {}
  perception::DepthMap sense(const perception::Pose& pose, const perception::Scene& scene,
                             std::uint64_t seed) const override;
  const perception::CameraModel& camera() const override { return camera_; }

 private:
  const depth::DepthNet& net_;
  perception::CameraModel camera_;
};

/// Networks loaded from the configured checkpoints.
struct LoadedNetworks {
  std::optional<policy::QNet> q;
  std::optional<collision::CollisionNet> rl_collision;
  std::optional<collision::CollisionNet> straight_collision;
  std::optional<depth::DepthNet> depth;
  Controllers controllers() const;
};

/// Loads what `kinds` need (plus the depth net when it is the observation
/// channel). Throws ArtifactError naming the first missing checkpoint.
LoadedNetworks load_networks(const HarnessConfig& config, std::span<const ControllerKind> kinds);

/// Oracle-plus-noise sensor, or the depth-net sensor when configured.
std::unique_ptr<perception::DepthSensor> make_sensor(const HarnessConfig& config, const LoadedNetworks& nets);

/// Scripted weaving flight used to gather image/depth pairs: lateral sweep
/// across the track with an independent heading oscillation.
sim::VelocityCommand meander_command(int step, double phase, const sim::VehicleState& state,
                                     const sim::CourseConfig& course, double speed);

using Progress = std::function<void(const std::string&)>;

perception::DepthDataset collect_depth_data(const HarnessConfig& config, const Progress& progress = {});

enum class CollisionGenerator : std::uint8_t { RlPolicy, StraightLine };
std::string_view generator_name(CollisionGenerator g);
CollisionGenerator generator_from_name(std::string_view name);

/// Flies the pilot with no arbitration and labels every decision frame. The
/// RL pilot alternates greedy episodes with noisy-network ones.
collision::CollisionDataset collect_collision_data(const HarnessConfig& config, CollisionGenerator generator,
                                                   const policy::QNet* q, const perception::DepthSensor& sensor,
                                                   const Progress& progress = {});

struct DepthTrainOutput {
  std::vector<depth::DepthEpochLog> log;
  depth::DepthMetrics validation;
};
DepthTrainOutput run_depth_training(const HarnessConfig& config, const perception::DepthDataset& data,
                                    depth::DepthNet& net, const depth::EpochCallback& on_epoch = {});

/// Fresh network, or continued from the policy checkpoint when `resume`.
std::vector<policy::PolicyEpisodeLog> run_policy_training(const HarnessConfig& config, policy::QNet& net,
                                                          const perception::DepthSensor& sensor,
                                                          const policy::PolicyEpisodeCallback& on_episode = {},
                                                          std::vector<policy::PolicySelectionLog>* selections = nullptr);

collision::CollisionTrainResult run_collision_training(const HarnessConfig& config,
                                                       const collision::CollisionDataset& data,
                                                       collision::CollisionNet& net,
                                                       const std::function<void(const collision::CollisionLogEntry&)>&
                                                           on_log = {});

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hnav::harness
