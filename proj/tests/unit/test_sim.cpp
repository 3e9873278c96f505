#include <gtest/gtest.h>

#include <cmath>

#include "hnav/sim/world.hpp"

using namespace hnav;
using namespace hnav::sim;

namespace {

CourseConfig empty_course() {
  CourseConfig c;
  c.obstacle_count = 0;
  return c;
}

}  // namespace

TEST(Actions, LeftIsPositiveY) {
  VehicleState s;
  const DynamicsConfig dyn;
  const auto left = apply_action(Action::Left, s, dyn);
  EXPECT_NEAR(left.velocity.x, 3.0 * std::cos(deg2rad(15.0)), 1e-12);
  EXPECT_NEAR(left.velocity.y, 3.0 * std::sin(deg2rad(15.0)), 1e-12);
  EXPECT_LT(apply_action(Action::Right, s, dyn).velocity.y, 0.0);
  const auto fwd = apply_action(Action::Forward, s, dyn);
  EXPECT_EQ(fwd.velocity, (Vec2{3.0, 0.0}));
  const auto back = apply_action(Action::Reverse, s, dyn);
  EXPECT_EQ(back.velocity, (Vec2{-0.5, 0.0}));
  EXPECT_EQ(back.yaw_mode, YawMode::Hold);
}

TEST(Actions, RelativeToHeading) {
  VehicleState s;
  s.yaw = deg2rad(90.0);
  const auto fwd = apply_action(Action::Forward, s);
  EXPECT_NEAR(fwd.velocity.x, 0.0, 1e-12);
  EXPECT_NEAR(fwd.velocity.y, 3.0, 1e-12);
}

TEST(Dynamics, FirstOrderLagFromRest) {
  const auto course = empty_course();
  const DynamicsConfig dyn;
  VehicleState s;
  const VelocityCommand cmd{{3.0, 0.0}};
  auto [s1, o1] = step(s, cmd, {}, course, dyn, 0);
  EXPECT_NEAR(s1.velocity.x, 1.0, 1e-12);
  EXPECT_NEAR(s1.position.x, 0.1, 1e-12);
  EXPECT_NEAR(s1.acceleration.x, 10.0, 1e-9);
  EXPECT_EQ(o1.step_index, 1);
  auto [s2, o2] = step(s1, cmd, {}, course, dyn, 1);
  EXPECT_NEAR(s2.velocity.x, 1.0 + 2.0 / 3.0, 1e-12);
  EXPECT_EQ(o2.step_index, 2);
}

TEST(Dynamics, StraightRunCompletesAtClosedFormStep) {
  // x_n = 0.3 n - 0.6 (1 - (2/3)^n) first reaches 100 m at n = 336
  World w(empty_course());
  const VelocityCommand cmd{{3.0, 0.0}};
  while (w.running()) w.step(cmd);
  EXPECT_EQ(w.outcome().classification, Outcome::Completed);
  EXPECT_EQ(w.outcome().step_index, 336);
  const double n = 336.0;
  EXPECT_NEAR(w.state().position.x, 0.3 * n - 0.6 * (1.0 - std::pow(2.0 / 3.0, n)), 1e-9);
}

TEST(Dynamics, YawTracksVelocityHeading) {
  const DynamicsConfig dyn;
  VehicleState s;
  const auto cmd = apply_action(Action::Left, s, dyn);
  auto [s1, o1] = step(s, cmd, {}, empty_course(), dyn, 0);
  EXPECT_NEAR(s1.yaw, deg2rad(5.0), 1e-12);  // a third of the 15 degree error
  EXPECT_NEAR(s1.yaw_rate, deg2rad(50.0), 1e-9);
}

TEST(Classify, Priority) {
  CourseConfig course = empty_course();
  const DynamicsConfig dyn;
  ObstacleBox b;
  b.cx = 100.0;
  b.cy = 6.0;
  const std::vector<ObstacleBox> obs{b};
  // collision beats out-of-bounds and completion
  EXPECT_EQ(classify({100.0, 6.5}, 5, obs, course, dyn), Outcome::Collision);
  EXPECT_EQ(classify({101.0, 6.5}, 5, {}, course, dyn), Outcome::OutOfBounds);
  EXPECT_EQ(classify({101.0, 0.0}, 600, {}, course, dyn), Outcome::Completed);
  EXPECT_EQ(classify({50.0, 0.0}, 600, {}, course, dyn), Outcome::Timeout);
  EXPECT_EQ(classify({50.0, 0.0}, 599, {}, course, dyn), Outcome::Running);
  EXPECT_EQ(classify({50.0, 6.0}, 1, {}, course, dyn), Outcome::Running);  // on the edge is inside
}

TEST(Classify, CollisionUsesVehicleRadius) {
  ObstacleBox b;  // footprint 4.5 x 2 centred at the origin
  const std::vector<ObstacleBox> obs{b};
  const auto course = empty_course();
  const DynamicsConfig dyn;
  EXPECT_EQ(classify({0.0, 1.29}, 1, obs, course, dyn), Outcome::Collision);
  EXPECT_EQ(classify({0.0, 1.31}, 1, obs, course, dyn), Outcome::Running);
  EXPECT_NEAR(b.distance({2.25 + 3.0, 1.0 + 4.0}), 5.0, 1e-12);
}

TEST(Course, StationsAndOffsets) {
  CourseConfig c;
  c.seed = 99;
  const auto boxes = generate_course(c);
  ASSERT_EQ(boxes.size(), 6u);
  for (int k = 0; k < 6; ++k) {
    EXPECT_DOUBLE_EQ(boxes[k].cx, 20.0 + 15.0 * k);
    EXPECT_LE(std::abs(boxes[k].cy), 5.0);
  }
  const auto again = generate_course(c);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(boxes[k].cy, again[k].cy);
  c.seed = 100;
  EXPECT_NE(generate_course(c)[0].cy, boxes[0].cy);
}

TEST(Course, InvalidGeometryThrows) {
  CourseConfig c;
  c.spacing = 30.0;  // 20 + 5*30 > 100
  EXPECT_THROW(generate_course(c), ConfigError);
  c = CourseConfig{};
  c.half_width = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(World, TimeoutAtStepLimitAndNoStepAfterTerminal) {
  World w(empty_course());
  while (w.running()) w.step(VelocityCommand{});
  EXPECT_EQ(w.outcome().classification, Outcome::Timeout);
  EXPECT_EQ(w.outcome().step_index, 600);
  EXPECT_THROW(w.step(VelocityCommand{}), std::logic_error);
}

TEST(Kinematics, NoiseFreeEstimateAndSeededNoise) {
  VehicleState s;
  s.position = {3.0, -1.5};
  s.velocity = {2.0, 0.5};
  s.yaw = 0.2;
  const auto k = kinematic_estimate(s, 0.0, 1);
  EXPECT_EQ(k[0], -1.5);
  EXPECT_EQ(k[1], 2.0);
  EXPECT_EQ(k[2], 0.5);
  EXPECT_EQ(k[9], 0.2);
  EXPECT_EQ(kinematic_estimate(s, 0.1, 5), kinematic_estimate(s, 0.1, 5));
  EXPECT_NE(kinematic_estimate(s, 0.1, 5), kinematic_estimate(s, 0.1, 6));
}

TEST(Outcome, NamesRoundTrip) {
  for (Outcome o : {Outcome::Running, Outcome::Completed, Outcome::Collision, Outcome::OutOfBounds, Outcome::Timeout})
    EXPECT_EQ(outcome_from_name(outcome_name(o)), o);
  EXPECT_THROW(outcome_from_name("crashed"), DataError);
}
