#include <algorithm>
#include <cmath>

#include "hnav/contingency/contingency.hpp"

namespace hnav::contingency {

std::string_view control_source_name(ControlSource s) {
  switch (s) {
    case ControlSource::Rl:
      return "rl";
    case ControlSource::Expert:
      return "expert";
    case ControlSource::AStar:
      return "astar";
    case ControlSource::StraightLine:
      return "straight-line";
  }
  return "?";
}

ControlSource control_source_from_name(std::string_view name) {
  for (auto s : {ControlSource::Rl, ControlSource::Expert, ControlSource::AStar, ControlSource::StraightLine})
    if (control_source_name(s) == name) return s;
  throw DataError("unknown control source: " + std::string(name));
}

ExpertSide expert_decision(double y, const perception::DepthMap& m, const OccupancyConfig& config) {
  const OccupancyRow occ = build_occupancy(m, config);
  const std::size_t half = kOccupancyCells / 2;
  const bool left_clear = std::none_of(occ.begin(), occ.begin() + half, [](bool b) { return b; });
  const bool right_clear = std::none_of(occ.begin() + half, occ.end(), [](bool b) { return b; });
  if (y < 0.0) return left_clear ? ExpertSide::Right : ExpertSide::Left;
  return right_clear ? ExpertSide::Left : ExpertSide::Right;
}

namespace {

class Maneuvers {
 public:
  Maneuvers(FlightInterface& flight, const PilotConfig& config) : f_(flight), c_(config) {}

  bool can_step() const { return f_.running() && steps_ < c_.step_budget; }
  int steps() const { return steps_; }
  bool exhausted() const { return f_.running() && steps_ >= c_.step_budget; }

  bool step(const sim::VelocityCommand& cmd) {
    if (!can_step()) return false;
    f_.command(cmd);
    ++steps_;
    return can_step();
  }

  sim::VelocityCommand hold(Vec2 v) const {
    sim::VelocityCommand cmd;
    cmd.velocity = v;
    cmd.yaw_mode = sim::YawMode::Hold;
    return cmd;
  }

  double speed() const { return f_.state().velocity.norm(); }

  // Always takes at least one step, so a gate that fires every step still
  // makes progress through the episode clock.
  void stop() {
    do {
      if (!step(hold({0.0, 0.0}))) return;
    } while (speed() > c_.stop_speed);
  }

  void rotate_to(double yaw) {
    sim::VelocityCommand cmd;
    cmd.yaw_mode = sim::YawMode::Target;
    cmd.yaw_target = yaw;
    do {
      if (!step(cmd)) return;
    } while (std::abs(wrap_angle(yaw - f_.state().yaw)) > c_.yaw_tolerance || speed() > c_.stop_speed);
  }

  void fly_lateral(double y_target) {
    const double gain = 1.5;
    while (can_step()) {
      const double e = y_target - f_.state().position.y;
      if (std::abs(e) < 0.05) return;
      const double v = std::clamp(gain * e, -c_.speed, c_.speed);
      if (!step(hold({0.0, v}))) return;
    }
  }

  // Along `heading` until `distance` is covered or the track edge margin is reached.
  void fly_straight(double heading, double distance, double speed) {
    const Vec2 start = f_.state().position;
    const double edge = f_.course().half_width - c_.boundary_margin;
    const Vec2 dir = rotate({1.0, 0.0}, heading);
    const Vec2 v = dir * speed;
    while (can_step()) {
      const Vec2 p = f_.state().position;
      if ((p - start).norm() >= distance) return;
      if (std::abs(p.y) >= edge && p.y * v.y > 0.0) return;
      if (!step(hold(v))) return;
    }
  }

  void follow(const std::vector<Vec2>& waypoints) {
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      const bool last = i + 1 == waypoints.size();
      while (true) {
        if (!can_step()) return;
        const Vec2 e = waypoints[i] - f_.state().position;
        const double dist = e.norm();
        if (dist < c_.waypoint_tolerance) break;
        const double s = last ? std::min(c_.speed, 1.5 * dist) : c_.speed;
        if (!step(hold(e * (s / dist)))) return;
      }
    }
  }

 private:
  FlightInterface& f_;
  const PilotConfig& c_;
  int steps_ = 0;
};

SegmentSummary finish(const Maneuvers& m, SegmentSummary s) {
  s.steps = m.steps();
  s.budget_exhausted = m.exhausted();
  return s;
}

}  // namespace

SegmentSummary run_expert_policy(FlightInterface& flight, const PilotConfig& config) {
  Maneuvers m(flight, config);
  SegmentSummary s;
  m.stop();
  if (!m.can_step()) return finish(m, {0, 0, "interrupted", false});
  const perception::DepthMap depth = flight.sense();
  s.attempts = 1;
  const ExpertSide side = expert_decision(flight.state().position.y, depth, config.occupancy);
  const double edge = flight.course().half_width - config.boundary_margin;
  m.fly_lateral(side == ExpertSide::Left ? edge : -edge);
  s.result = side == ExpertSide::Left ? "lateral-left" : "lateral-right";
  return finish(m, s);
}

SegmentSummary run_astar_policy(FlightInterface& flight, const PilotConfig& config,
                                std::vector<ProcedureResult>* attempts) {
  Maneuvers m(flight, config);
  SegmentSummary s;
  s.result = "no-path";
  m.stop();
  const double h0 = flight.state().yaw;
  const double headings[3] = {h0, h0 - config.turn, h0 + config.turn};  // as-is, right, left
  for (int round = 0; round < 2; ++round) {
    for (double heading : headings) {
      if (!m.can_step()) return finish(m, {0, s.attempts, "interrupted", false});
      if (heading != h0) {
        m.rotate_to(h0);
        m.rotate_to(heading);
      } else if (std::abs(wrap_angle(flight.state().yaw - h0)) > config.yaw_tolerance) {
        m.rotate_to(h0);
      }
      if (!m.can_step()) return finish(m, {0, s.attempts, "interrupted", false});
      const auto& st = flight.state();
      ProcedureResult r =
          procedure_a({st.position.x, st.position.y, st.yaw}, flight.sense(), flight.course().half_width,
                      config.camera, config.arena);
      ++s.attempts;
      const PlanKind kind = r.kind;
      std::vector<Vec2> waypoints;
      if (kind == PlanKind::Path) waypoints = r.plan.path->waypoints;
      if (attempts) attempts->push_back(std::move(r));
      if (kind == PlanKind::NoObstacle) {
        m.fly_straight(flight.state().yaw, config.forward_distance, config.speed);
        s.result = "no-obstacle";
        return finish(m, s);
      }
      if (kind == PlanKind::Path) {
        m.follow(waypoints);
        s.result = "path";
        return finish(m, s);
      }
    }
    m.rotate_to(h0);
    if (round == 0) {
      m.fly_straight(h0 + std::numbers::pi, config.reverse_distance, 0.5);
      m.stop();
    }
  }
  return finish(m, s);
}

}  // namespace hnav::contingency
