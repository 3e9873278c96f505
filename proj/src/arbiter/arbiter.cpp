#include "hnav/arbiter/arbiter.hpp"

namespace hnav::arbiter {

std::string_view contingency_name(ContingencyKind k) {
  switch (k) {
    case ContingencyKind::None:
      return "none";
    case ContingencyKind::Expert:
      return "expert";
    case ContingencyKind::AStar:
      return "astar";
  }
  return "?";
}

PilotChoice QPilot::choose(const policy::Observation& obs, const sim::VehicleState& state) const {
  PilotChoice c;
  c.action = policy::select_action(net_.q_values(obs));
  c.command = sim::apply_action(static_cast<sim::Action>(c.action), state, dyn_);
  return c;
}

PilotChoice StraightLinePilot::choose(const policy::Observation&, const sim::VehicleState&) const {
  PilotChoice c;
  c.action = static_cast<int>(sim::Action::Forward);
  c.command.velocity = {speed_, 0.0};
  c.command.yaw_mode = sim::YawMode::Target;
  c.command.yaw_target = 0.0;
  return c;
}

void ArbiterState::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("arbiter threshold must lie in (0, 1]");
  if (cooldown < 0) throw ConfigError("arbiter cooldown must be non-negative");
}

Decision decide(const policy::Observation& obs, const sim::VehicleState& state, const Pilot& pilot,
                const CollisionPredictor* predictor, ArbiterState& sm) {
  if (sm.mode != Mode::Rl) throw std::logic_error("decide called while a contingency holds control");
  Decision d;
  d.choice = pilot.choose(obs, state);
  if (!predictor || sm.kind == ContingencyKind::None) return d;
  if (sm.cooldown_left > 0) {
    --sm.cooldown_left;
    return d;
  }
  d.probability = predictor->probability(obs, d.choice.action);
  d.engage = d.probability > sm.threshold;
  return d;
}

Decision episode_step(contingency::FlightInterface& flight, const policy::Observation& obs, const Pilot& pilot,
                      const CollisionPredictor* predictor, ArbiterState& sm,
                      const contingency::PilotConfig& pilot_config, std::vector<EngagementEvent>& events) {
  if (!flight.running()) throw std::logic_error("episode_step on a finished episode");
  const Decision d = decide(obs, flight.state(), pilot, predictor, sm);
  if (!d.engage) {
    flight.set_source(pilot.source());
    flight.annotate(d.choice.action, d.probability);
    flight.command(d.choice.command);
    return d;
  }
  EngagementEvent ev;
  ev.probability = d.probability;
  ev.action = d.choice.action;
  ev.kind = sm.kind;
  ++sm.engagements;
  sm.mode = Mode::ContingencyActive;
  // the rejected action is kept on the event only; contingency steps carry no action
  contingency::SegmentSummary seg;
  if (sm.kind == ContingencyKind::Expert) {
    flight.set_source(contingency::ControlSource::Expert);
    flight.annotate(-1, d.probability);
    seg = contingency::run_expert_policy(flight, pilot_config);
  } else {
    flight.set_source(contingency::ControlSource::AStar);
    flight.annotate(-1, d.probability);
    seg = contingency::run_astar_policy(flight, pilot_config);
  }
  sm.mode = Mode::Rl;
  sm.cooldown_left = sm.cooldown;
  ev.duration = seg.steps;
  ev.attempts = seg.attempts;
  ev.result = seg.result;
  events.push_back(ev);
  return d;
}

}  // namespace hnav::arbiter
