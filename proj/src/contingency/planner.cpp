#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

#include <json.hpp>

#include "hnav/contingency/contingency.hpp"

namespace hnav::contingency {

OccupancyRow build_occupancy(const perception::DepthMap& m, const OccupancyConfig& config) {
  if (m.cols != kOccupancyCells || m.rows < config.first_row + config.row_count)
    throw ConfigError("occupancy needs a reduced map with 16 columns and the configured middle rows");
  if (m.units != perception::DepthUnits::Meters) throw DataError("occupancy expects a map in meters");
  OccupancyRow row{};
  for (std::size_t c = 0; c < kOccupancyCells; ++c)
    for (std::size_t r = config.first_row; r < config.first_row + config.row_count; ++r)
      if (m.at(r, c) < config.threshold) row[c] = true;
  return row;
}

std::array<Vec2, 4> ObstacleSquare::corners() const {
  const std::array<Vec2, 4> local = {
      Vec2{near, lateral_right}, Vec2{far(), lateral_right}, Vec2{far(), lateral_left()}, Vec2{near, lateral_left()}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = origin + rotate(local[i], yaw);
  return out;
}

std::vector<ObstacleSquare> build_obstacle_map(const OccupancyRow& occ, const perception::DepthMap& m,
                                               const perception::Pose& pose, const perception::CameraModel& camera,
                                               const OccupancyConfig& config) {
  if (m.cols != kOccupancyCells) throw ConfigError("obstacle map needs 16 depth columns");
  const double th = camera.tan_half_h();
  const double half = 0.5 * static_cast<double>(kOccupancyCells);
  std::vector<ObstacleSquare> squares;
  std::size_t j = 0;
  while (j < kOccupancyCells) {
    if (!occ[j]) {
      ++j;
      continue;
    }
    const std::size_t j0 = j;
    while (j < kOccupancyCells && occ[j]) ++j;
    const std::size_t j1 = j - 1;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t c = j0; c <= j1; ++c)
      for (std::size_t r = config.first_row; r < config.first_row + config.row_count; ++r) d = std::min(d, m.at(r, c));
    const double cell = 2.0 * d * th / static_cast<double>(kOccupancyCells);
    ObstacleSquare s;
    s.near = d;
    s.side = static_cast<double>(j1 - j0 + 1) * cell;
    // column 0 is the leftmost; its left edge sits at +half cells
    s.lateral_right = (half - 1.0 - static_cast<double>(j1)) * cell;
    s.yaw = pose.yaw;
    s.origin = {pose.x, pose.y};
    squares.push_back(s);
  }
  return squares;
}

PlanningArena make_arena(const perception::Pose& start, std::vector<ObstacleSquare> squares, double half_width,
                         const ArenaOptions& options) {
  if (options.step <= 0.0) throw ConfigError("lattice step must be positive");
  PlanningArena a;
  a.start = start;
  a.half_width = half_width;
  a.options = options;
  double depth = options.min_depth;
  for (const auto& s : squares)
    for (const Vec2& c : s.corners()) depth = std::max(depth, c.x - start.x);
  a.goal_x = start.x + depth;
  a.squares = std::move(squares);
  return a;
}

const std::array<LatticeCell, 8>& lattice_moves() {
  static const std::array<LatticeCell, 8> moves = {{
      {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1},
  }};
  return moves;
}

Vec2 cell_position(const PlanningArena& arena, LatticeCell c) {
  const Vec2 local{arena.options.step * c.f, arena.options.step * c.l};
  return Vec2{arena.start.x, arena.start.y} + rotate(local, arena.start.yaw);
}

double segment_box_distance(Vec2 a, Vec2 b, Vec2 lo, Vec2 hi) {
  // clip the segment against the box (slab test)
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = b - a;
  bool hit = true;
  const double p[2] = {a.x, a.y};
  const double dd[2] = {d.x, d.y};
  const double l[2] = {lo.x, lo.y};
  const double h[2] = {hi.x, hi.y};
  for (int k = 0; k < 2 && hit; ++k) {
    if (std::abs(dd[k]) < 1e-15) {
      if (p[k] < l[k] || p[k] > h[k]) hit = false;
      continue;
    }
    double ta = (l[k] - p[k]) / dd[k];
    double tb = (h[k] - p[k]) / dd[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) hit = false;
  }
  if (hit) return 0.0;

  auto point_box = [&](Vec2 q) {
    const double dx = std::max({lo.x - q.x, 0.0, q.x - hi.x});
    const double dy = std::max({lo.y - q.y, 0.0, q.y - hi.y});
    return std::hypot(dx, dy);
  };
  auto point_segment = [&](Vec2 q) {
    const double len2 = d.dot(d);
    const double t = len2 > 0.0 ? std::clamp((q - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (a + d * t - q).norm();
  };
  double best = std::min(point_box(a), point_box(b));
  for (Vec2 c : {lo, hi, Vec2{lo.x, hi.y}, Vec2{hi.x, lo.y}}) best = std::min(best, point_segment(c));
  return best;
}

namespace {

// square-local frame: x forward from the sensing origin, y to the left
Vec2 to_square(const ObstacleSquare& s, Vec2 p) { return rotate(p - s.origin, -s.yaw); }

bool clear_of_squares(const PlanningArena& arena, Vec2 a, Vec2 b) {
  for (const auto& s : arena.squares) {
    const double dist = segment_box_distance(to_square(s, a), to_square(s, b), {s.near, s.lateral_right},
                                             {s.far(), s.lateral_left()});
    if (dist <= arena.options.inflation) return false;
  }
  return true;
}

}  // namespace

bool cell_free(const PlanningArena& arena, LatticeCell c) {
  if (arena.options.fov_constraint && c.f < std::abs(c.l)) return false;
  const Vec2 p = cell_position(arena, c);
  if (std::abs(p.y) > arena.half_width - arena.options.boundary_margin) return false;
  return clear_of_squares(arena, p, p);
}

bool segment_free(const PlanningArena& arena, LatticeCell a, LatticeCell b) {
  return clear_of_squares(arena, cell_position(arena, a), cell_position(arena, b));
}

bool is_goal(const PlanningArena& arena, LatticeCell c) {
  return cell_position(arena, c).x >= arena.goal_x - 1e-9;
}

namespace {

std::uint64_t key(LatticeCell c) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.f)) << 32) | static_cast<std::uint32_t>(c.l);
}

struct Node {
  double f;
  double g;
  std::uint64_t order;
  LatticeCell cell;
  bool operator>(const Node& o) const {
    if (f != o.f) return f > o.f;
    if (g != o.g) return g < o.g;  // prefer deeper nodes on ties
    return order > o.order;
  }
};

}  // namespace

PlanResult astar_plan(const PlanningArena& arena) {
  PlanResult result;
  const double step = arena.options.step;
  auto h = [&](LatticeCell c) { return std::max(0.0, arena.goal_x - cell_position(arena, c).x); };
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  std::unordered_map<std::uint64_t, double> best_g;
  std::unordered_map<std::uint64_t, LatticeCell> parent;
  std::unordered_map<std::uint64_t, bool> closed;
  const LatticeCell start{0, 0};
  std::uint64_t order = 0;
  open.push({h(start), 0.0, order++, start});
  best_g[key(start)] = 0.0;
  while (!open.empty()) {
    const Node n = open.top();
    open.pop();
    const auto k = key(n.cell);
    if (closed[k]) continue;
    closed[k] = true;
    ++result.expanded;
    result.explored.push_back(n.cell);
    if (is_goal(arena, n.cell)) {
      PlannedPath path;
      path.cost = n.g;
      for (LatticeCell c = n.cell;;) {
        path.cells.push_back(c);
        if (c == start) break;
        c = parent.at(key(c));
      }
      std::reverse(path.cells.begin(), path.cells.end());
      for (const auto& c : path.cells) path.waypoints.push_back(cell_position(arena, c));
      result.path = std::move(path);
      return result;
    }
    if (result.expanded >= arena.options.node_limit) break;
    for (const auto& m : lattice_moves()) {
      const LatticeCell next{n.cell.f + m.f, n.cell.l + m.l};
      const auto nk = key(next);
      if (closed.count(nk) && closed[nk]) continue;
      if (!cell_free(arena, next) || !segment_free(arena, n.cell, next)) continue;
      const double g = n.g + step * ((m.f != 0 && m.l != 0) ? std::numbers::sqrt2 : 1.0);
      auto it = best_g.find(nk);
      if (it != best_g.end() && it->second <= g) continue;
      best_g[nk] = g;
      parent[nk] = n.cell;
      open.push({g + h(next), g, order++, next});
    }
  }
  return result;
}

std::string_view plan_kind_name(PlanKind k) {
  switch (k) {
    case PlanKind::NoObstacle:
      return "no-obstacle";
    case PlanKind::Path:
      return "path";
    case PlanKind::NoPath:
      return "no-path";
  }
  return "?";
}

ProcedureResult procedure_a(const perception::Pose& pose, const perception::DepthMap& m, double half_width,
                            const perception::CameraModel& camera, const ArenaOptions& options) {
  ProcedureResult r;
  r.occupancy = build_occupancy(m);
  if (std::none_of(r.occupancy.begin(), r.occupancy.end(), [](bool b) { return b; })) {
    r.kind = PlanKind::NoObstacle;
    return r;
  }
  r.squares = build_obstacle_map(r.occupancy, m, pose, camera);
  r.arena = make_arena(pose, r.squares, half_width, options);
  r.plan = astar_plan(*r.arena);
  r.kind = r.plan.path ? PlanKind::Path : PlanKind::NoPath;
  return r;
}

std::string planner_debug_json(const ProcedureResult& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["result"] = plan_kind_name(r.kind);
  ordered_json occ = ordered_json::array();
  for (bool b : r.occupancy) occ.push_back(b ? 1 : 0);
  j["occupancy"] = occ;
  ordered_json sq = ordered_json::array();
  for (const auto& s : r.squares) {
    ordered_json corners = ordered_json::array();
    for (const Vec2& c : s.corners()) corners.push_back({c.x, c.y});
    sq.push_back({{"near", s.near}, {"lateral_right", s.lateral_right}, {"side", s.side}, {"yaw", s.yaw},
                  {"corners", corners}});
  }
  j["squares"] = sq;
  if (r.arena) {
    const auto& a = *r.arena;
    j["arena"] = {{"start", {a.start.x, a.start.y, a.start.yaw}},
                  {"half_width", a.half_width},
                  {"goal_x", a.goal_x},
                  {"inflation", a.options.inflation},
                  {"step", a.options.step}};
    ordered_json explored = ordered_json::array();
    for (const auto& c : r.plan.explored) {
      const Vec2 p = cell_position(a, c);
      explored.push_back({p.x, p.y});
    }
    j["explored"] = explored;
    if (r.plan.path) {
      ordered_json wp = ordered_json::array();
      for (const Vec2& p : r.plan.path->waypoints) wp.push_back({p.x, p.y});
      j["path"] = {{"cost", r.plan.path->cost}, {"waypoints", wp}};
    }
  }
  return j.dump(2);
}

}  // namespace hnav::contingency
