#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hnav/perception/camera.hpp"
#include "hnav/sim/world.hpp"

namespace hnav::contingency {

inline constexpr std::size_t kOccupancyCells = 16;
using OccupancyRow = std::array<bool, kOccupancyCells>;

struct OccupancyConfig {
  std::size_t first_row = 3;  // middle three of nine rows
  std::size_t row_count = 3;
  double threshold = 10.0;  // meters, strict
};

/// Column j is occupied iff some middle-row cell of column j is closer than
/// the threshold. Expects the reduced map in meters.
OccupancyRow build_occupancy(const perception::DepthMap& reduced_meters, const OccupancyConfig& config = {});

/// Square proxy for one contiguous occupied block, laid out in the heading
/// frame of the pose it was sensed from (forward, +left).
struct ObstacleSquare {
  double near = 0.0;           // forward distance of the near face
  double lateral_right = 0.0;  // right edge (smaller lateral coordinate)
  double side = 0.0;
  double yaw = 0.0;     // heading at sensing time
  Vec2 origin;          // sensing position, world frame

  double lateral_left() const { return lateral_right + side; }
  double far() const { return near + side; }
  /// Corners in the world frame.
  std::array<Vec2, 4> corners() const;
};

/// Per contiguous block: d = block minimum over the middle rows, cell width
/// 2 d tan(hfov/2) / 16, side = block length * cell width, lateral span
/// from the block's column edges projected to range d.
std::vector<ObstacleSquare> build_obstacle_map(const OccupancyRow& occupancy,
                                               const perception::DepthMap& reduced_meters,
                                               const perception::Pose& pose, const perception::CameraModel& camera = {},
                                               const OccupancyConfig& config = {});

struct ArenaOptions {
  double step = 1.0;
  double min_depth = 5.0;
  double inflation = 0.3;        // vehicle radius; 0 plans to the raw squares
  double boundary_margin = 0.5;  // keep waypoints this far inside the track edges
  bool fov_constraint = true;
  std::size_t node_limit = 200000;
};

/// Track-wide rectangle ahead of the start pose. The lattice is anchored at
/// the start position with moves fixed relative to the start heading.
struct PlanningArena {
  perception::Pose start;
  double half_width = 6.0;
  double goal_x = 5.0;  // world x of the goal edge
  std::vector<ObstacleSquare> squares;
  ArenaOptions options;
};

PlanningArena make_arena(const perception::Pose& start, std::vector<ObstacleSquare> squares, double half_width,
                         const ArenaOptions& options = {});

/// Lattice offsets in the start heading frame: (forward, left) in steps.
struct LatticeCell {
  int f = 0;
  int l = 0;
  bool operator==(const LatticeCell&) const = default;
};

struct PlannedPath {
  std::vector<LatticeCell> cells;  // includes the start cell
  std::vector<Vec2> waypoints;     // world frame, same length as cells
  double cost = 0.0;
};

struct PlanResult {
  std::optional<PlannedPath> path;  // empty = no path
  std::size_t expanded = 0;
  std::vector<LatticeCell> explored;
};

Vec2 cell_position(const PlanningArena& arena, LatticeCell c);

/// Whether a lattice cell is admissible: inside the track band, inside the
/// view wedge, and clear of every inflated square.
bool cell_free(const PlanningArena& arena, LatticeCell c);
/// Whether the straight segment between two admissible cells stays clear.
bool segment_free(const PlanningArena& arena, LatticeCell a, LatticeCell b);
bool is_goal(const PlanningArena& arena, LatticeCell c);

/// The eight moves in order: forward, forward-right, right, back-right, back,
/// back-left, left, forward-left.
const std::array<LatticeCell, 8>& lattice_moves();

/// A* with step costs 1 and sqrt(2); heuristic = remaining world-x distance
/// to the goal edge.
PlanResult astar_plan(const PlanningArena& arena);

/// Distance between a segment and an axis-aligned box [lo, hi] (0 if they touch).
double segment_box_distance(Vec2 a, Vec2 b, Vec2 lo, Vec2 hi);

enum class PlanKind { NoObstacle, Path, NoPath };
std::string_view plan_kind_name(PlanKind k);

struct ProcedureResult {
  PlanKind kind = PlanKind::NoObstacle;
  OccupancyRow occupancy{};
  std::vector<ObstacleSquare> squares;
  std::optional<PlanningArena> arena;
  PlanResult plan;
};

/// Occupancy, squares, arena and search from one sensed map.
ProcedureResult procedure_a(const perception::Pose& pose, const perception::DepthMap& reduced_meters,
                            double half_width, const perception::CameraModel& camera = {},
                            const ArenaOptions& options = {});

/// JSON dump of a planning attempt for replay and plotting.
std::string planner_debug_json(const ProcedureResult& result);

/// Who issued a step's command.
enum class ControlSource : std::uint8_t { Rl = 0, Expert = 1, AStar = 2, StraightLine = 3 };
std::string_view control_source_name(ControlSource s);
ControlSource control_source_from_name(std::string_view name);

/// What a contingency pilot needs from the vehicle: stepping with raw
/// velocity commands and sensing the reduced depth map.
class FlightInterface {
 public:
  virtual ~FlightInterface() = default;
  /// Attribution for the commands that follow.
  virtual void set_source(ControlSource) {}
  /// Action index and collision probability behind the next command, when
  /// a learned pilot issued it.
  virtual void annotate(int /*action*/, double /*probability*/) {}
  virtual sim::StepOutcome command(const sim::VelocityCommand& cmd) = 0;
  virtual const sim::VehicleState& state() const = 0;
  virtual bool running() const = 0;
  /// Reduced map in meters.
  virtual perception::DepthMap sense() = 0;
  virtual const sim::CourseConfig& course() const = 0;
};

struct PilotConfig {
  double speed = 1.5;            // m/s for all contingency flight
  double boundary_margin = 0.5;  // stop this far inside the track edge
  int step_budget = 200;
  double stop_speed = 0.1;
  double yaw_tolerance = deg2rad(0.5);
  double turn = deg2rad(30.0);
  double forward_distance = 4.0;
  double reverse_distance = 1.0;
  double waypoint_tolerance = 0.25;
  perception::CameraModel camera;
  ArenaOptions arena;
  OccupancyConfig occupancy;
};

struct SegmentSummary {
  int steps = 0;
  int attempts = 0;  // sensing passes
  std::string result;  // what the pilot ended up doing
  bool budget_exhausted = false;
};

/// Stop, sense, fly laterally to the edge picked by the rule table.
SegmentSummary run_expert_policy(FlightInterface& flight, const PilotConfig& config = {});

/// Stop and run the plan/turn/reverse ladder.
SegmentSummary run_astar_policy(FlightInterface& flight, const PilotConfig& config = {},
                                std::vector<ProcedureResult>* attempts = nullptr);

enum class ExpertSide { Left, Right };

/// Rule table of the expert: y < 0 is right of the middle, y = 0 counts as
/// left. Returns the boundary the vehicle should fly to.
ExpertSide expert_decision(double y, const perception::DepthMap& reduced_meters, const OccupancyConfig& config = {});

}  // namespace hnav::contingency
