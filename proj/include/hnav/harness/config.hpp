#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hnav/collision/collision_net.hpp"
#include "hnav/contingency/contingency.hpp"
#include "hnav/depth/depth_net.hpp"
#include "hnav/perception/camera.hpp"
#include "hnav/policy/policy_net.hpp"
#include "hnav/sim/world.hpp"

namespace hnav::harness {

enum class DepthSource : std::uint8_t { Oracle, DepthNet };

struct DepthDataConfig {
  std::size_t pairs = 2400;
  int capture_every = 3;  // steps between captured frames
  std::uint64_t seed = 11;
};

struct CollisionDataConfig {
  std::size_t episodes = 200;
  std::size_t min_frames = 60000;  // keep collecting past `episodes` until reached
  std::size_t min_positives = 400;  // likewise; a good policy rarely crashes
  std::size_t max_episodes = 5000;
  std::uint64_t seed = 21;
};

struct EvaluationConfig {
  std::size_t episodes = 300;
  std::uint64_t seed = 1000;
};

struct ArtifactPaths {
  std::filesystem::path depth_data = "data/depth";
  std::filesystem::path collision_data_rl = "data/collision_rl";
  std::filesystem::path collision_data_straight = "data/collision_straight";
  std::filesystem::path depth_net = "checkpoints/depth.hnav";
  std::filesystem::path policy = "checkpoints/policy.hnav";
  std::filesystem::path collision_rl = "checkpoints/collision_rl.hnav";
  std::filesystem::path collision_straight = "checkpoints/collision_straight.hnav";
};

/// Every tunable of the pipeline. Loaded from one JSON file; missing keys
/// keep their defaults, unknown keys are rejected.
struct HarnessConfig {
  sim::CourseConfig course;
  sim::DynamicsConfig dynamics;
  perception::CameraModel camera;
  double depth_sigma = perception::kDefaultDepthNoiseSigma;
  double kinematic_sigma = 0.02;
  bool side_walls = false;
  DepthSource depth_source = DepthSource::Oracle;

  policy::PolicyNetConfig policy_net;
  policy::PolicyTrainConfig policy_train;

  collision::CollisionNetConfig collision_net;
  collision::CollisionSchedule collision_train;
  CollisionDataConfig collision_data;

  depth::DepthNetConfig depth_net;
  depth::DepthSchedule depth_train;
  DepthDataConfig depth_data;

  double threshold = 0.5;  // p*
  int cooldown = 0;
  contingency::PilotConfig pilot;

  EvaluationConfig evaluation;
  ArtifactPaths paths;

  void validate() const;
};

HarnessConfig config_from_json(const std::string& text);
HarnessConfig load_config(const std::filesystem::path& path);
/// Fully resolved config, keys in a fixed order.
std::string config_to_json(const HarnessConfig& config, int indent = 2);
/// FNV-1a of the compact canonical dump.
std::uint64_t config_hash(const HarnessConfig& config);

/// $HNAV_OUTPUT_DIR, or ./hnav_out when unset.
std::filesystem::path output_dir();
/// Relative artifact paths resolve against the output directory.
std::filesystem::path resolve(const std::filesystem::path& p);

}  // namespace hnav::harness
