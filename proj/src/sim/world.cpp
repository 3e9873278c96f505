#include "hnav/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hnav/rng.hpp"

namespace hnav::sim {

void CourseConfig::validate() const {
  if (length <= 0.0 || half_width <= 0.0) throw ConfigError("course length and half-width must be positive");
  if (obstacle_count < 0) throw ConfigError("obstacle count must be non-negative");
  if (obstacle_width <= 0.0 || obstacle_depth <= 0.0 || obstacle_height <= 0.0)
    throw ConfigError("obstacle footprint and height must be positive");
  if (obstacle_count > 0 && first_x + (obstacle_count - 1) * spacing > length)
    throw ConfigError("obstacles extend past the end of the course");
  if (obstacle_width > 2.0 * half_width) throw ConfigError("obstacle footprint wider than the track");
}

Vec2 ObstacleBox::to_local(Vec2 p) const { return rotate(p - Vec2{cx, cy}, -yaw); }

double ObstacleBox::distance(Vec2 p) const {
  const Vec2 q = to_local(p);
  const double dx = std::max(std::abs(q.x) - half_depth, 0.0);
  const double dy = std::max(std::abs(q.y) - half_width, 0.0);
  return std::hypot(dx, dy);
}

std::array<Vec2, 4> ObstacleBox::corners() const {
  std::array<Vec2, 4> out;
  const Vec2 c{cx, cy};
  const Vec2 local[4] = {{half_depth, half_width}, {half_depth, -half_width},
                         {-half_depth, -half_width}, {-half_depth, half_width}};
  for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = c + rotate(local[i], yaw);
  return out;
}

std::vector<ObstacleBox> generate_course(const CourseConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed, 0x636f75727365ull));
  const double lateral_limit = config.half_width - 0.5 * config.obstacle_width;
  std::vector<ObstacleBox> boxes;
  boxes.reserve(static_cast<std::size_t>(config.obstacle_count));
  for (int k = 0; k < config.obstacle_count; ++k) {
    ObstacleBox b;
    b.cx = config.first_x + k * config.spacing;
    b.cy = rng.uniform(-lateral_limit, lateral_limit);
    b.half_width = 0.5 * config.obstacle_width;
    b.half_depth = 0.5 * config.obstacle_depth;
    b.height = config.obstacle_height;
    boxes.push_back(b);
  }
  return boxes;
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Left: return "left";
    case Action::Forward: return "forward";
    case Action::Right: return "right";
    case Action::Reverse: return "reverse";
  }
  return "?";
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Completed: return "completed";
    case Outcome::Collision: return "collision";
    case Outcome::OutOfBounds: return "out-of-bounds";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

Outcome outcome_from_name(std::string_view name) {
  for (Outcome o : {Outcome::Running, Outcome::Completed, Outcome::Collision, Outcome::OutOfBounds,
                    Outcome::Timeout})
    if (outcome_name(o) == name) return o;
  throw DataError("unknown outcome name: " + std::string(name));
}

VelocityCommand apply_action(Action action, const VehicleState& state, const DynamicsConfig& dyn) {
  VelocityCommand cmd;
  switch (action) {
    case Action::Forward:
      cmd.velocity = rotate({dyn.cruise_speed, 0.0}, state.yaw);
      break;
    case Action::Left:
      cmd.velocity = rotate({dyn.cruise_speed, 0.0}, state.yaw + dyn.turn_angle);
      break;
    case Action::Right:
      cmd.velocity = rotate({dyn.cruise_speed, 0.0}, state.yaw - dyn.turn_angle);
      break;
    case Action::Reverse:
      cmd.velocity = rotate({-dyn.reverse_speed, 0.0}, state.yaw);
      cmd.yaw_mode = YawMode::Hold;
      break;
  }
  return cmd;
}

Outcome classify(Vec2 position, int step_index, std::span<const ObstacleBox> obstacles,
                 const CourseConfig& course, const DynamicsConfig& dyn) {
  for (const auto& b : obstacles)
    if (b.distance(position) <= dyn.vehicle_radius) return Outcome::Collision;
  if (std::abs(position.y) > course.half_width) return Outcome::OutOfBounds;
  if (position.x >= course.length) return Outcome::Completed;
  if (step_index >= dyn.max_steps) return Outcome::Timeout;
  return Outcome::Running;
}

std::pair<VehicleState, StepOutcome> step(const VehicleState& state, const VelocityCommand& command,
                                          std::span<const ObstacleBox> obstacles,
                                          const CourseConfig& course, const DynamicsConfig& dyn,
                                          int step_index) {
  const double k = dyn.dt / dyn.tau;
  VehicleState next = state;
  next.command = command;
  next.velocity = state.velocity + (command.velocity - state.velocity) * k;

  double yaw_goal = state.yaw;
  switch (command.yaw_mode) {
    case YawMode::FollowVelocity:
      if (command.velocity.norm() > 1e-9) yaw_goal = std::atan2(command.velocity.y, command.velocity.x);
      break;
    case YawMode::Hold:
      break;
    case YawMode::Target:
      yaw_goal = command.yaw_target;
      break;
  }
  next.yaw = wrap_angle(state.yaw + k * wrap_angle(yaw_goal - state.yaw));
  next.position = state.position + next.velocity * dyn.dt;
  next.acceleration = (next.velocity - state.velocity) * (1.0 / dyn.dt);
  next.yaw_rate = wrap_angle(next.yaw - state.yaw) / dyn.dt;
  next.yaw_accel = (next.yaw_rate - state.yaw_rate) / dyn.dt;

  StepOutcome out;
  out.step_index = step_index + 1;
  out.classification = classify(next.position, out.step_index, obstacles, course, dyn);
  return {next, out};
}

KinematicEstimate kinematic_estimate(const VehicleState& s, double sigma, std::uint64_t seed) {
  KinematicEstimate k{s.position.y, s.velocity.x, s.velocity.y, 0.0,
                      s.acceleration.x, s.acceleration.y, 0.0,
                      0.0, 0.0, s.yaw,
                      0.0, 0.0, s.yaw_rate,
                      0.0, 0.0, s.yaw_accel};
  if (sigma > 0.0) {
    Rng rng(seed);
    for (double& v : k) v += sigma * rng.normal();
  }
  return k;
}

World::World(const CourseConfig& course, const DynamicsConfig& dyn)
    : World(course, generate_course(course), dyn) {}

World::World(const CourseConfig& course, std::vector<ObstacleBox> obstacles, const DynamicsConfig& dyn)
    : course_(course), dyn_(dyn), obstacles_(std::move(obstacles)) {
  course_.validate();
}

const StepOutcome& World::step(const VelocityCommand& command) {
  if (outcome_.terminal())
    throw std::logic_error("world step after terminal outcome " +
                           std::string(outcome_name(outcome_.classification)));
  auto [next, out] = sim::step(state_, command, obstacles_, course_, dyn_, outcome_.step_index);
  state_ = next;
  outcome_ = out;
  return outcome_;
}

}  // namespace hnav::sim
