#include <gtest/gtest.h>

#include <cmath>

#include "hnav/contingency/contingency.hpp"
#include "hnav/perception/sensor.hpp"
#include "oracles.hpp"

using namespace hnav;
using namespace hnav::contingency;
using perception::DepthMap;
using perception::DepthUnits;
using perception::Resolution;

namespace {

DepthMap far_map() { return DepthMap(9, 16, 100.0, Resolution::Reduced, DepthUnits::Meters); }

// Noise-free world for driving the pilots.
class TestFlight : public FlightInterface {
 public:
  TestFlight(const sim::CourseConfig& course, std::vector<sim::ObstacleBox> boxes, sim::VehicleState start)
      : world_(course, boxes, {}), scene_(perception::make_scene(course, boxes)), sensor_({}, 0.0) {
    world_.set_state(start);
  }
  sim::StepOutcome command(const sim::VelocityCommand& cmd) override {
    ++steps;
    return world_.step(cmd);
  }
  const sim::VehicleState& state() const override { return world_.state(); }
  bool running() const override { return world_.running(); }
  DepthMap sense() override {
    const auto& s = world_.state();
    return perception::reduced_truth({s.position.x, s.position.y, s.yaw}, scene_, sensor_.camera());
  }
  const sim::CourseConfig& course() const override { return world_.course(); }
  sim::World& world() { return world_; }
  int steps = 0;

 private:
  sim::World world_;
  perception::Scene scene_;
  perception::OracleDepthSensor sensor_;
};

sim::CourseConfig open_course() {
  sim::CourseConfig c;
  c.obstacle_count = 0;
  return c;
}

sim::VehicleState at(double x, double y) {
  sim::VehicleState s;
  s.position = {x, y};
  return s;
}

}  // namespace

TEST(Occupancy, MiddleRowsStrictThreshold) {
  DepthMap m = far_map();
  m.at(4, 5) = 8.0;
  m.at(0, 2) = 1.0;   // top row ignored
  m.at(3, 9) = 10.0;  // not strictly closer
  m.at(5, 12) = 9.99;
  const OccupancyRow occ = build_occupancy(m);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(occ[j], j == 5 || j == 12) << j;
  EXPECT_THROW(build_occupancy(DepthMap(9, 16, 0.0, Resolution::Reduced, DepthUnits::Normalized)), DataError);
}

TEST(Occupancy, MonotoneInDepth) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    DepthMap m = far_map();
    for (double& v : m.values) v = rng.uniform(0.0, 30.0);
    const OccupancyRow before = build_occupancy(m);
    m.values[rng.index(m.values.size())] *= rng.uniform();
    const OccupancyRow after = build_occupancy(m);
    for (std::size_t j = 0; j < 16; ++j)
      if (before[j]) ASSERT_TRUE(after[j]);
  }
}

TEST(Squares, BlockProjection) {
  DepthMap m = far_map();
  for (std::size_t c = 6; c <= 9; ++c) m.at(4, c) = 9.0;
  m.at(3, 7) = 8.0;
  const perception::CameraModel cam;
  const OccupancyRow occ = build_occupancy(m);
  const auto squares = build_obstacle_map(occ, m, {0.0, 0.0, 0.0}, cam);
  ASSERT_EQ(squares.size(), 1u);
  const double cell = 2.0 * 8.0 * cam.tan_half_h() / 16.0;
  EXPECT_NEAR(squares[0].near, 8.0, 1e-12);
  EXPECT_NEAR(squares[0].side, 4.0 * cell, 1e-12);
  EXPECT_NEAR(squares[0].lateral_right, -2.0 * cell, 1e-12);
  EXPECT_NEAR(squares[0].lateral_left(), 2.0 * cell, 1e-12);

  // two blocks, the leftmost column maps to positive lateral offsets
  DepthMap two = far_map();
  two.at(4, 0) = 5.0;
  two.at(4, 15) = 5.0;
  const auto s2 = build_obstacle_map(build_occupancy(two), two, {0.0, 0.0, 0.0}, cam);
  ASSERT_EQ(s2.size(), 2u);
  EXPECT_GT(s2[0].lateral_right, 0.0);
  EXPECT_LT(s2[1].lateral_left(), 0.0);
}

TEST(Squares, CornersFollowSensingPose) {
  ObstacleSquare s;
  s.near = 2.0;
  s.side = 1.0;
  s.lateral_right = -0.5;
  s.yaw = deg2rad(90.0);
  s.origin = {10.0, 1.0};
  const auto c = s.corners();
  EXPECT_NEAR(c[0].x, 10.5, 1e-12);
  EXPECT_NEAR(c[0].y, 3.0, 1e-12);
  EXPECT_NEAR(c[2].x, 9.5, 1e-12);
  EXPECT_NEAR(c[2].y, 4.0, 1e-12);
}

TEST(Planner, EmptyArenaGoesStraight) {
  const PlanningArena a = make_arena({0.0, 0.0, 0.0}, {}, 6.0);
  EXPECT_EQ(a.goal_x, 5.0);
  const PlanResult r = astar_plan(a);
  ASSERT_TRUE(r.path);
  EXPECT_EQ(r.path->cells.size(), 6u);
  EXPECT_EQ(r.path->cost, 5.0);
  EXPECT_EQ(r.path->cells.back(), (LatticeCell{5, 0}));
}

TEST(Planner, MatchesUniformCostOracle) {
  Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    const PlanningArena a = oracle::random_arena(rng);
    const PlanResult r = astar_plan(a);
    const auto want = oracle::uniform_cost(a);
    ASSERT_EQ(r.path.has_value(), want.has_value()) << "arena " << k;
    if (!want) continue;
    EXPECT_NEAR(r.path->cost, *want, 1e-9) << "arena " << k;
    for (const Vec2& w : r.path->waypoints) {
      for (const auto& s : a.squares) ASSERT_GT(oracle::square_distance(s, w), a.options.inflation);
      ASSERT_LE(std::abs(w.y), a.half_width - a.options.boundary_margin + 1e-12);
    }
    for (const auto& c : r.path->cells) ASSERT_GE(c.f, std::abs(c.l));
  }
}

TEST(Planner, BlockedArenaHasNoPath) {
  Rng rng(13);
  for (int k = 0; k < 20; ++k) {
    const PlanningArena a = oracle::blocked_arena(rng);
    EXPECT_FALSE(astar_plan(a).path);
    EXPECT_FALSE(oracle::uniform_cost(a));
  }
}

TEST(Planner, ProcedureOnClearMap) {
  const ProcedureResult r = procedure_a({0.0, 0.0, 0.0}, far_map(), 6.0);
  EXPECT_EQ(r.kind, PlanKind::NoObstacle);
  EXPECT_FALSE(r.arena);
  EXPECT_EQ(plan_kind_name(r.kind), "no-obstacle");
}

TEST(Planner, SegmentBoxDistance) {
  EXPECT_EQ(segment_box_distance({0, 0}, {4, 0}, {1, -1}, {2, 1}), 0.0);
  EXPECT_NEAR(segment_box_distance({0, 2}, {4, 2}, {1, -1}, {2, 1}), 1.0, 1e-12);
  EXPECT_NEAR(segment_box_distance({0, 0}, {0.5, 0}, {1, -1}, {2, 1}), 0.5, 1e-12);
  EXPECT_NEAR(segment_box_distance({3, 3}, {3, 3}, {1, -1}, {2, 1}), std::sqrt(5.0), 1e-12);
}

TEST(Expert, RuleTable) {
  DepthMap clear = far_map();
  DepthMap left_blocked = far_map();
  left_blocked.at(4, 2) = 5.0;
  DepthMap right_blocked = far_map();
  right_blocked.at(4, 12) = 5.0;
  // right of the centerline (y < 0): left half clear -> fly right
  EXPECT_EQ(expert_decision(-2.0, clear), ExpertSide::Right);
  EXPECT_EQ(expert_decision(-2.0, left_blocked), ExpertSide::Left);
  // left of the centerline: mirror image
  EXPECT_EQ(expert_decision(2.0, clear), ExpertSide::Left);
  EXPECT_EQ(expert_decision(2.0, right_blocked), ExpertSide::Right);
  // y = 0 counts as left of middle
  EXPECT_EQ(expert_decision(0.0, right_blocked), ExpertSide::Right);
  EXPECT_EQ(expert_decision(0.0, left_blocked), ExpertSide::Left);
}

TEST(Expert, FliesToTheBoundaryMargin) {
  TestFlight f(open_course(), {}, at(10.0, -2.0));
  const SegmentSummary s = run_expert_policy(f);
  EXPECT_EQ(s.result, "lateral-right");
  EXPECT_NEAR(f.state().position.y, -5.5, 0.06);
  EXPECT_NEAR(f.state().position.x, 10.0, 1e-9);  // no forward motion
  EXPECT_LE(s.steps, 200);
  EXPECT_EQ(s.steps, f.steps);
}

TEST(AStarPilot, NoObstacleFliesFourMeters) {
  TestFlight f(open_course(), {}, at(10.0, 0.0));
  std::vector<ProcedureResult> attempts;
  const SegmentSummary s = run_astar_policy(f, {}, &attempts);
  EXPECT_EQ(s.result, "no-obstacle");
  EXPECT_EQ(attempts.size(), 1u);
  EXPECT_GE(f.state().position.x, 14.0);
  EXPECT_LT(f.state().position.x, 14.2);
}

TEST(AStarPilot, WallLadderReturnsControl) {
  sim::ObstacleBox wall;
  wall.cx = 16.0;
  wall.half_width = 8.0;
  wall.half_depth = 0.5;
  TestFlight f(open_course(), {wall}, at(10.0, 0.0));
  std::vector<ProcedureResult> attempts;
  const SegmentSummary s = run_astar_policy(f, {}, &attempts);
  EXPECT_EQ(s.result, "no-path");
  EXPECT_EQ(s.attempts, 6);
  for (const auto& a : attempts) EXPECT_EQ(a.kind, PlanKind::NoPath);
  EXPECT_LE(s.steps, 200);
  EXPECT_TRUE(f.running());
  EXPECT_NEAR(f.state().position.x, 9.0, 0.15);  // backed up one meter
}

TEST(AStarPilot, PlansAroundABox) {
  sim::ObstacleBox box;
  box.cx = 17.0;
  box.cy = 0.5;
  TestFlight f(open_course(), {box}, at(10.0, 0.0));
  std::vector<ProcedureResult> attempts;
  const SegmentSummary s = run_astar_policy(f, {}, &attempts);
  EXPECT_EQ(s.result, "path");
  ASSERT_FALSE(attempts.empty());
  EXPECT_EQ(attempts.back().kind, PlanKind::Path);
  EXPECT_TRUE(f.running());
  EXPECT_LT(f.state().position.y, -0.8);  // passes right of the box edge at y = -0.5
  EXPECT_GT(f.state().position.x, 17.0);
  EXPECT_FALSE(planner_debug_json(attempts.back()).empty());
}
