#include "hnav/harness/episode.hpp"

#include <json.hpp>

namespace hnav::harness {

using nlohmann::json;
using nlohmann::ordered_json;
using contingency::ControlSource;

std::string_view controller_name(ControllerKind k) {
  switch (k) {
    case ControllerKind::HybridAStar:
      return "hybrid-astar";
    case ControllerKind::HybridExpert:
      return "hybrid-expert";
    case ControllerKind::RlOnly:
      return "rl-only";
    case ControllerKind::ExpertOnly:
      return "expert-only";
  }
  return "?";
}

std::string_view controller_label(ControllerKind k) {
  switch (k) {
    case ControllerKind::HybridAStar:
      return "Hybrid (A*)";
    case ControllerKind::HybridExpert:
      return "Hybrid (expert)";
    case ControllerKind::RlOnly:
      return "RL policy";
    case ControllerKind::ExpertOnly:
      return "Expert Only";
  }
  return "?";
}

const std::vector<ControllerKind>& all_controllers() {
  static const std::vector<ControllerKind> all = {ControllerKind::HybridAStar, ControllerKind::HybridExpert,
                                                  ControllerKind::RlOnly, ControllerKind::ExpertOnly};
  return all;
}

ControllerKind controller_from_name(std::string_view name) {
  for (auto k : all_controllers())
    if (controller_name(k) == name) return k;
  throw ConfigError("unknown controller '" + std::string(name) +
                    "' (expected hybrid-expert, hybrid-astar, rl-only or expert-only)");
}

ControlSource EpisodeRecord::terminal_source() const {
  if (steps.empty()) throw DataError("episode record has no steps");
  return steps.back().source;
}

// ---- serialization ----

namespace {

ordered_json state_json(const sim::VehicleState& s) {
  const auto& c = s.command;
  return ordered_json{{"p", {s.position.x, s.position.y}},
                      {"v", {s.velocity.x, s.velocity.y}},
                      {"a", {s.acceleration.x, s.acceleration.y}},
                      {"yaw", {s.yaw, s.yaw_rate, s.yaw_accel}},
                      {"cmd", {c.velocity.x, c.velocity.y, static_cast<int>(c.yaw_mode), c.yaw_target}}};
}

sim::VehicleState state_from(const json& j) {
  sim::VehicleState s;
  s.position = {j.at("p")[0].get<double>(), j.at("p")[1].get<double>()};
  s.velocity = {j.at("v")[0].get<double>(), j.at("v")[1].get<double>()};
  s.acceleration = {j.at("a")[0].get<double>(), j.at("a")[1].get<double>()};
  s.yaw = j.at("yaw")[0].get<double>();
  s.yaw_rate = j.at("yaw")[1].get<double>();
  s.yaw_accel = j.at("yaw")[2].get<double>();
  const auto& c = j.at("cmd");
  s.command.velocity = {c[0].get<double>(), c[1].get<double>()};
  const int mode = c[2].get<int>();
  if (mode < 0 || mode > 2) throw DataError("bad yaw mode in record");
  s.command.yaw_mode = static_cast<sim::YawMode>(mode);
  s.command.yaw_target = c[3].get<double>();
  return s;
}

arbiter::ContingencyKind kind_from(const std::string& s) {
  for (auto k : {arbiter::ContingencyKind::None, arbiter::ContingencyKind::Expert, arbiter::ContingencyKind::AStar})
    if (arbiter::contingency_name(k) == s) return k;
  throw DataError("unknown contingency kind in record: " + s);
}

}  // namespace

std::string record_to_json(const EpisodeRecord& r, int indent) {
  ordered_json j;
  j["controller"] = controller_name(r.controller);
  j["seed"] = r.seed;
  j["config_hash"] = hex64(r.config_hash);
  j["outcome"] = sim::outcome_name(r.outcome);
  j["steps"] = r.step_count;
  ordered_json ev = ordered_json::array();
  for (const auto& e : r.engagements)
    ev.push_back({{"step", e.step_index},
                  {"p", e.probability},
                  {"action", e.action},
                  {"kind", arbiter::contingency_name(e.kind)},
                  {"duration", e.duration},
                  {"attempts", e.attempts},
                  {"result", e.result}});
  j["engagements"] = ev;
  ordered_json trace = ordered_json::array();
  for (const auto& s : r.steps) {
    ordered_json t{{"i", s.step_index},
                   {"src", contingency::control_source_name(s.source)},
                   {"action", s.action},
                   {"p", s.probability},
                   {"state", state_json(s.state)}};
    if (!s.observation.empty()) t["obs"] = s.observation;
    trace.push_back(std::move(t));
  }
  j["trace"] = trace;
  return j.dump(indent);
}

EpisodeRecord record_from_json(const std::string& text) {
  EpisodeRecord r;
  try {
    const json j = json::parse(text);
    r.controller = controller_from_name(j.at("controller").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    r.outcome = sim::outcome_from_name(j.at("outcome").get<std::string>());
    r.step_count = j.at("steps").get<int>();
    for (const auto& e : j.at("engagements")) {
      arbiter::EngagementEvent ev;
      ev.step_index = e.at("step").get<int>();
      ev.probability = e.at("p").get<double>();
      ev.action = e.at("action").get<int>();
      ev.kind = kind_from(e.at("kind").get<std::string>());
      ev.duration = e.at("duration").get<int>();
      ev.attempts = e.at("attempts").get<int>();
      ev.result = e.at("result").get<std::string>();
      r.engagements.push_back(ev);
    }
    for (const auto& t : j.at("trace")) {
      StepRecord s;
      s.step_index = t.at("i").get<int>();
      s.source = contingency::control_source_from_name(t.at("src").get<std::string>());
      s.action = t.at("action").get<int>();
      s.probability = t.at("p").get<double>();
      s.state = state_from(t.at("state"));
      if (t.contains("obs")) s.observation = t.at("obs").get<std::vector<double>>();
      r.steps.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed episode record: ") + e.what());
  }
  if (static_cast<int>(r.steps.size()) != r.step_count) throw DataError("episode record step count mismatch");
  return r;
}

std::uint64_t record_hash(const EpisodeRecord& r) { return fnv1a(record_to_json(r, -1)); }

bool same_trajectory(const EpisodeRecord& a, const EpisodeRecord& b) {
  if (a.outcome != b.outcome || a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (x.step_index != y.step_index || x.source != y.source || x.action != y.action || !(x.state == y.state))
      return false;
  }
  return true;
}

// ---- flight ----

SimFlight::SimFlight(const sim::CourseConfig& course, const HarnessConfig& config,
                     const perception::DepthSensor& sensor, std::uint64_t seed, std::vector<StepRecord>* log)
    : world_(course, config.dynamics),
      scene_(perception::make_scene(course, world_.obstacles(), config.side_walls)),
      sensor_(sensor),
      kinematic_sigma_(config.kinematic_sigma),
      seed_(seed),
      log_(log) {}

sim::StepOutcome SimFlight::command(const sim::VelocityCommand& cmd) {
  const sim::StepOutcome out = world_.step(cmd);
  if (log_) {
    StepRecord s;
    s.step_index = out.step_index;
    s.source = source_;
    s.action = action_;
    s.probability = probability_;
    s.state = world_.state();
    s.observation = std::move(pending_obs_);
    log_->push_back(std::move(s));
  }
  pending_obs_.clear();
  action_ = -1;
  probability_ = -1.0;
  return out;
}

perception::DepthMap SimFlight::sense() {
  const auto step = static_cast<std::uint64_t>(world_.outcome().step_index);
  const perception::DepthMap m = sensor_.sense(perception::pose_of(world_.state()), scene_, mix_seed(seed_, step, 3));
  return perception::denormalize(m, sensor_.camera().far_clip);
}

policy::Observation SimFlight::observe() const {
  const auto step = static_cast<std::uint64_t>(world_.outcome().step_index);
  return policy::observe(world_.state(), scene_, sensor_, kinematic_sigma_, mix_seed(seed_, step));
}

void SimFlight::stash_observation(const policy::Observation& obs) { pending_obs_.assign(obs.begin(), obs.end()); }

// ---- episodes ----

EpisodeRecord run_episode(ControllerKind kind, std::uint64_t seed, const HarnessConfig& config,
                          const Controllers& nets, const perception::DepthSensor& sensor,
                          const EpisodeOptions& options) {
  const bool uses_q = kind != ControllerKind::ExpertOnly;
  if (uses_q && !nets.q) throw ArtifactError("controller " + std::string(controller_name(kind)) +
                                             " needs the policy checkpoint (checkpoints.policy)");
  const collision::CollisionNet* gate_net = nullptr;
  arbiter::ContingencyKind contingency = arbiter::ContingencyKind::None;
  switch (kind) {
    case ControllerKind::HybridAStar:
    case ControllerKind::HybridExpert:
      gate_net = nets.rl_collision;
      contingency =
          kind == ControllerKind::HybridAStar ? arbiter::ContingencyKind::AStar : arbiter::ContingencyKind::Expert;
      if (!gate_net && !nets.predictor_override)
        throw ArtifactError("controller " + std::string(controller_name(kind)) +
                            " needs the collision checkpoint (checkpoints.collision_rl)");
      break;
    case ControllerKind::ExpertOnly:
      gate_net = nets.straight_collision;
      contingency = arbiter::ContingencyKind::Expert;
      if (!gate_net && !nets.predictor_override)
        throw ArtifactError("controller expert-only needs the straight-line collision checkpoint "
                            "(checkpoints.collision_straight)");
      break;
    case ControllerKind::RlOnly:
      break;
  }

  std::optional<arbiter::NetPredictor> net_predictor;
  const arbiter::CollisionPredictor* predictor = nullptr;
  if (contingency != arbiter::ContingencyKind::None) {
    if (nets.predictor_override) {
      predictor = nets.predictor_override;
    } else {
      net_predictor.emplace(*gate_net);
      predictor = &*net_predictor;
    }
  }
  std::optional<arbiter::QPilot> q_pilot;
  arbiter::StraightLinePilot straight(config.dynamics.cruise_speed);
  if (uses_q) q_pilot.emplace(*nets.q, config.dynamics);
  const arbiter::Pilot& pilot = uses_q ? static_cast<const arbiter::Pilot&>(*q_pilot) : straight;

  contingency::PilotConfig pilot_config = config.pilot;
  pilot_config.camera = sensor.camera();

  EpisodeRecord rec;
  rec.controller = kind;
  rec.seed = seed;
  rec.config_hash = config_hash(config);
  sim::CourseConfig course = config.course;
  course.seed = seed;
  SimFlight flight(course, config, sensor, seed, &rec.steps);

  arbiter::ArbiterState sm;
  sm.threshold = config.threshold;
  sm.kind = contingency;
  sm.cooldown = config.cooldown;
  sm.validate();

  while (flight.running()) {
    const policy::Observation obs = flight.observe();
    if (options.record_observations) flight.stash_observation(obs);
    const int before = flight.world().outcome().step_index;
    const std::size_t n_events = rec.engagements.size();
    arbiter::episode_step(flight, obs, pilot, predictor, sm, pilot_config, rec.engagements);
    if (rec.engagements.size() > n_events) rec.engagements.back().step_index = before;
  }
  rec.outcome = flight.world().outcome().classification;
  rec.step_count = flight.world().outcome().step_index;
  return rec;
}

}  // namespace hnav::harness
