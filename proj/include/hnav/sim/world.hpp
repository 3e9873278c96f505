#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "hnav/common.hpp"

namespace hnav::sim {

/// Straight obstacle course: a track along +x with obstacles at fixed
/// stations and random lateral offsets. +y is to the left of the direction
/// of travel.
struct CourseConfig {
  double length = 100.0;
  double half_width = 6.0;
  int obstacle_count = 6;
  double first_x = 20.0;
  double spacing = 15.0;
  double obstacle_width = 2.0;  // lateral extent
  double obstacle_depth = 4.5;  // extent along the track
  double obstacle_height = 1.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ObstacleBox {
  double cx = 0.0;
  double cy = 0.0;
  double half_width = 1.0;   // along the box's local y
  double half_depth = 2.25;  // along the box's local x
  double yaw = 0.0;
  double height = 1.5;

  Vec2 to_local(Vec2 p) const;
  /// Euclidean distance from p to the footprint (0 inside).
  double distance(Vec2 p) const;
  bool contains(Vec2 p) const { return distance(p) == 0.0; }
  std::array<Vec2, 4> corners() const;
};

std::vector<ObstacleBox> generate_course(const CourseConfig& config);

enum class Action : int { Left = 0, Forward = 1, Right = 2, Reverse = 3 };
inline constexpr int kActionCount = 4;
std::string_view action_name(Action a);

enum class YawMode : std::uint8_t { FollowVelocity = 0, Hold = 1, Target = 2 };

/// World-frame velocity setpoint for the low-level controller.
struct VelocityCommand {
  Vec2 velocity;
  YawMode yaw_mode = YawMode::FollowVelocity;
  double yaw_target = 0.0;
  bool operator==(const VelocityCommand&) const = default;
};

struct VehicleState {
  Vec2 position;
  Vec2 velocity;
  Vec2 acceleration;
  double yaw = 0.0;
  double yaw_rate = 0.0;
  double yaw_accel = 0.0;
  VelocityCommand command;
  bool operator==(const VehicleState&) const = default;
};

enum class Outcome : std::uint8_t { Running = 0, Completed, Collision, OutOfBounds, Timeout };
std::string_view outcome_name(Outcome o);
Outcome outcome_from_name(std::string_view name);

struct StepOutcome {
  Outcome classification = Outcome::Running;
  int step_index = 0;
  bool terminal() const { return classification != Outcome::Running; }
};

struct DynamicsConfig {
  double dt = 0.1;
  double tau = 0.3;
  double vehicle_radius = 0.3;
  int max_steps = 600;
  double cruise_speed = 3.0;
  double reverse_speed = 0.5;
  double turn_angle = deg2rad(15.0);
};

/// Converts a discrete action into a world-frame velocity command using the
/// vehicle's current yaw.
VelocityCommand apply_action(Action action, const VehicleState& state,
                             const DynamicsConfig& dyn = {});

/// Classification of a position against the course (collision has priority
/// over out-of-bounds, then completion, then timeout).
Outcome classify(Vec2 position, int step_index, std::span<const ObstacleBox> obstacles,
                 const CourseConfig& course, const DynamicsConfig& dyn);

/// One 0.1 s step of first-order velocity tracking. `step_index` is the
/// number of steps already taken.
std::pair<VehicleState, StepOutcome> step(const VehicleState& state, const VelocityCommand& command,
                                          std::span<const ObstacleBox> obstacles,
                                          const CourseConfig& course, const DynamicsConfig& dyn,
                                          int step_index);

inline constexpr std::size_t kKinematicSize = 16;
using KinematicEstimate = std::array<double, kKinematicSize>;

/// (p_y, v_x, v_y, v_z, a_x, a_y, a_z, roll, pitch, yaw, rates..., accels...)
/// with seeded additive Gaussian noise on every channel.
KinematicEstimate kinematic_estimate(const VehicleState& state, double sigma, std::uint64_t seed);

/// A course instance plus the vehicle flying it.
class World {
 public:
  World(const CourseConfig& course, const DynamicsConfig& dyn = {});
  World(const CourseConfig& course, std::vector<ObstacleBox> obstacles, const DynamicsConfig& dyn);

  /// Throws std::logic_error once the episode has terminated.
  const StepOutcome& step(const VelocityCommand& command);

  const VehicleState& state() const { return state_; }
  const StepOutcome& outcome() const { return outcome_; }
  const std::vector<ObstacleBox>& obstacles() const { return obstacles_; }
  const CourseConfig& course() const { return course_; }
  const DynamicsConfig& dynamics() const { return dyn_; }
  bool running() const { return !outcome_.terminal(); }

  /// Test hook: place the vehicle (resets derived quantities, keeps step count).
  void set_state(const VehicleState& s) { state_ = s; }

 private:
  CourseConfig course_;
  DynamicsConfig dyn_;
  std::vector<ObstacleBox> obstacles_;
  VehicleState state_;
  StepOutcome outcome_;
};

}  // namespace hnav::sim
