#include "hnav/harness/pipeline.hpp"

#include <fstream>

#include "hnav/nn/checkpoint.hpp"

namespace hnav::harness {

perception::DepthMap DepthNetSensor::sense(const perception::Pose& pose, const perception::Scene& scene,
                                           std::uint64_t) const {
  perception::DepthMap m = depth::predict(perception::render_rgb(pose, scene, camera_), net_).map;
  for (double& v : m.values) v = std::clamp(v, -1.0, 1.0);
  return m;
}

Controllers LoadedNetworks::controllers() const {
  Controllers c;
  if (q) c.q = &*q;
  if (rl_collision) c.rl_collision = &*rl_collision;
  if (straight_collision) c.straight_collision = &*straight_collision;
  return c;
}

namespace {

nn::NetworkParams load_checked(const std::filesystem::path& rel, const char* what) {
  const auto p = resolve(rel);
  if (!std::filesystem::exists(p))
    throw ArtifactError(std::string("missing ") + what + " checkpoint: " + p.string());
  return nn::load_params(p);
}

}  // namespace

LoadedNetworks load_networks(const HarnessConfig& config, std::span<const ControllerKind> kinds) {
  LoadedNetworks n;
  bool need_q = false, need_rl = false, need_straight = false;
  for (auto k : kinds) {
    need_q |= k != ControllerKind::ExpertOnly;
    need_rl |= k == ControllerKind::HybridAStar || k == ControllerKind::HybridExpert;
    need_straight |= k == ControllerKind::ExpertOnly;
  }
  if (config.depth_source == DepthSource::DepthNet)
    n.depth.emplace(config.depth_net, load_checked(config.paths.depth_net, "depth network"));
  if (need_q) n.q.emplace(config.policy_net, load_checked(config.paths.policy, "policy"));
  if (need_rl) n.rl_collision.emplace(config.collision_net, load_checked(config.paths.collision_rl, "collision (rl)"));
  if (need_straight)
    n.straight_collision.emplace(config.collision_net,
                                 load_checked(config.paths.collision_straight, "collision (straight-line)"));
  return n;
}

std::unique_ptr<perception::DepthSensor> make_sensor(const HarnessConfig& config, const LoadedNetworks& nets) {
  if (config.depth_source == DepthSource::DepthNet) {
    if (!nets.depth) throw ArtifactError("depth-net observation channel requested but no depth network loaded");
    return std::make_unique<DepthNetSensor>(*nets.depth, config.camera);
  }
  return std::make_unique<perception::OracleDepthSensor>(config.camera, config.depth_sigma);
}

sim::VelocityCommand meander_command(int step, double phase, const sim::VehicleState& state,
                                     const sim::CourseConfig& course, double speed) {
  const double t = static_cast<double>(step);
  const double lateral_goal = 0.75 * course.half_width * std::sin(2.0 * std::numbers::pi * t / 120.0 + phase);
  sim::VelocityCommand cmd;
  cmd.velocity = {speed, std::clamp(0.8 * (lateral_goal - state.position.y), -1.5, 1.5)};
  cmd.yaw_mode = sim::YawMode::Target;
  cmd.yaw_target = deg2rad(25.0) * std::sin(2.0 * std::numbers::pi * t / 45.0 + 2.0 * phase) +
                   deg2rad(8.0) * std::sin(2.0 * std::numbers::pi * t / 13.0);
  return cmd;
}

perception::DepthDataset collect_depth_data(const HarnessConfig& config, const Progress& progress) {
  perception::DepthDataset data;
  data.camera = config.camera;
  data.seed = config.depth_data.seed;
  for (std::uint64_t e = 0; data.size() < config.depth_data.pairs; ++e) {
    sim::CourseConfig course = config.course;
    course.seed = mix_seed(config.depth_data.seed, 0x6d65616e646572ull, e);
    sim::World world(course, config.dynamics);
    const perception::Scene scene = perception::make_scene(course, world.obstacles(), config.side_walls);
    Rng rng(course.seed);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double speed = rng.uniform(1.5, 3.0);
    while (world.running() && data.size() < config.depth_data.pairs) {
      const int k = world.outcome().step_index;
      if (k % config.depth_data.capture_every == 0) {
        const auto view = perception::render_view(perception::pose_of(world.state()), scene, config.camera, true);
        data.add(view.rgb, perception::normalize(perception::min_pool(view.depth, config.camera.pool_block),
                                                 config.camera.far_clip));
      }
      world.step(meander_command(k, phase, world.state(), course, speed));
    }
    if (progress)
      progress("depth data: episode " + std::to_string(e) + " -> " + std::to_string(data.size()) + " pairs");
  }
  return data;
}

std::string_view generator_name(CollisionGenerator g) {
  return g == CollisionGenerator::RlPolicy ? "rl-policy" : "straight-line";
}

CollisionGenerator generator_from_name(std::string_view name) {
  if (name == "rl-policy" || name == "rl") return CollisionGenerator::RlPolicy;
  if (name == "straight-line" || name == "straight") return CollisionGenerator::StraightLine;
  throw ConfigError("unknown collision data generator '" + std::string(name) + "' (rl-policy or straight-line)");
}

collision::CollisionDataset collect_collision_data(const HarnessConfig& config, CollisionGenerator generator,
                                                   const policy::QNet* q, const perception::DepthSensor& sensor,
                                                   const Progress& progress) {
  if (generator == CollisionGenerator::RlPolicy && !q)
    throw ArtifactError("rl-policy collision data needs the policy checkpoint (checkpoints.policy)");
  const auto& dc = config.collision_data;
  collision::CollisionDataset data;
  data.horizon = config.collision_net.horizon;
  data.generator = generator_name(generator);
  data.seed = dc.seed;
  const arbiter::StraightLinePilot straight(config.dynamics.cruise_speed);
  const std::uint64_t tag = generator == CollisionGenerator::RlPolicy ? 0x726cull : 0x73746cull;
  for (std::uint64_t e = 0; e < dc.max_episodes; ++e) {
    if (e >= dc.episodes && data.size() >= dc.min_frames && data.positives() >= dc.min_positives) break;
    sim::CourseConfig course = config.course;
    course.seed = mix_seed(dc.seed, tag, e);
    SimFlight flight(course, config, sensor, course.seed, nullptr);
    collision::EpisodeFrames frames;
    const bool noisy = (e % 2) == 1;
    while (flight.running()) {
      const policy::Observation obs = flight.observe();
      const auto step = static_cast<std::uint64_t>(flight.world().outcome().step_index);
      int action;
      sim::VelocityCommand cmd;
      if (generator == CollisionGenerator::RlPolicy) {
        const auto noise = noisy ? std::optional<std::uint64_t>(mix_seed(course.seed, step, 7)) : std::nullopt;
        action = policy::select_action(q->q_values(obs, noise));
        cmd = sim::apply_action(static_cast<sim::Action>(action), flight.state(), config.dynamics);
      } else {
        const auto c = straight.choose(obs, flight.state());
        action = c.action;
        cmd = c.command;
      }
      frames.observations.push_back(obs);
      frames.actions.push_back(action);
      flight.command(cmd);
    }
    frames.outcome = flight.world().outcome().classification;
    frames.steps = flight.world().outcome().step_index;
    data.add_episode(frames, static_cast<std::uint32_t>(e));
    if (progress && (e % 20 == 19))
      progress("collision data (" + data.generator + "): " + std::to_string(e + 1) + " episodes, " +
               std::to_string(data.size()) + " frames, " + std::to_string(data.positives()) + " positive");
  }
  return data;
}

DepthTrainOutput run_depth_training(const HarnessConfig& config, const perception::DepthDataset& data,
                                    depth::DepthNet& net, const depth::EpochCallback& on_epoch) {
  DepthTrainOutput out;
  out.log = depth::train_depth(data, net, config.depth_train, on_epoch);
  const auto split = depth::split_dataset(data.size(), config.depth_train.train_fraction, config.depth_train.seed);
  out.validation = depth::validate_depth(net, data, split.validation);
  return out;
}

std::vector<policy::PolicyEpisodeLog> run_policy_training(const HarnessConfig& config, policy::QNet& net,
                                                          const perception::DepthSensor& sensor,
                                                          const policy::PolicyEpisodeCallback& on_episode,
                                                          std::vector<policy::PolicySelectionLog>* selections) {
  policy::RolloutSetup setup;
  setup.course = config.course;
  setup.dynamics = config.dynamics;
  setup.sensor = &sensor;
  setup.side_walls = config.side_walls;
  policy::PolicyTrainConfig t = config.policy_train;
  t.kinematic_sigma = config.kinematic_sigma;
  return policy::train_policy(net, setup, t, on_episode, selections);
}

collision::CollisionTrainResult run_collision_training(
    const HarnessConfig& config, const collision::CollisionDataset& data, collision::CollisionNet& net,
    const std::function<void(const collision::CollisionLogEntry&)>& on_log) {
  if (data.horizon != config.collision_net.horizon)
    throw ConfigError("collision dataset horizon " + std::to_string(data.horizon) + " differs from configured " +
                      std::to_string(config.collision_net.horizon));
  return collision::train_collision(net, data, config.collision_train, on_log);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << text;
}

}  // namespace hnav::harness
