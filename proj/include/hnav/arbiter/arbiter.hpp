#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hnav/collision/collision_net.hpp"
#include "hnav/contingency/contingency.hpp"
#include "hnav/policy/policy_net.hpp"

namespace hnav::arbiter {

enum class Mode : std::uint8_t { Rl, ContingencyActive };
enum class ContingencyKind : std::uint8_t { None, Expert, AStar };
std::string_view contingency_name(ContingencyKind k);

struct PilotChoice {
  int action = 0;
  sim::VelocityCommand command;
};

/// The default controller between engagements.
class Pilot {
 public:
  virtual ~Pilot() = default;
  virtual PilotChoice choose(const policy::Observation& obs, const sim::VehicleState& state) const = 0;
  virtual contingency::ControlSource source() const = 0;
};

/// Greedy Q-network policy in evaluation mode (noise off).
class QPilot : public Pilot {
 public:
  QPilot(const policy::QNet& net, const sim::DynamicsConfig& dyn = {}) : net_(net), dyn_(dyn) {}
  PilotChoice choose(const policy::Observation& obs, const sim::VehicleState& state) const override;
  contingency::ControlSource source() const override { return contingency::ControlSource::Rl; }

 private:
  const policy::QNet& net_;
  sim::DynamicsConfig dyn_;
};

/// Flies world +x at cruise speed holding heading 0. Reports Forward as its
/// action for collision queries.
class StraightLinePilot : public Pilot {
 public:
  explicit StraightLinePilot(double speed = 3.0) : speed_(speed) {}
  PilotChoice choose(const policy::Observation& obs, const sim::VehicleState& state) const override;
  contingency::ControlSource source() const override { return contingency::ControlSource::StraightLine; }

 private:
  double speed_;
};

class CollisionPredictor {
 public:
  virtual ~CollisionPredictor() = default;
  virtual double probability(const policy::Observation& obs, int action) const = 0;
};

class NetPredictor : public CollisionPredictor {
 public:
  explicit NetPredictor(const collision::CollisionNet& net) : net_(net) {}
  double probability(const policy::Observation& obs, int action) const override { return net_.predict(obs, action); }

 private:
  const collision::CollisionNet& net_;
};

class ConstantPredictor : public CollisionPredictor {
 public:
  explicit ConstantPredictor(double p) : p_(p) {}
  double probability(const policy::Observation&, int) const override { return p_; }

 private:
  double p_;
};

struct ArbiterState {
  Mode mode = Mode::Rl;
  double threshold = 0.5;
  ContingencyKind kind = ContingencyKind::None;
  int engagements = 0;
  int cooldown = 0;       // arbitration points skipped after each return
  int cooldown_left = 0;
  void validate() const;
};

struct Decision {
  bool engage = false;
  PilotChoice choice;
  double probability = -1.0;  // -1 when no predictor ran
};

/// Tentative pilot action, then its collision probability; engage iff
/// p > threshold. No predictor (or kind None) never engages.
Decision decide(const policy::Observation& obs, const sim::VehicleState& state, const Pilot& pilot,
                const CollisionPredictor* predictor, ArbiterState& state_machine);

struct EngagementEvent {
  int step_index = 0;  // steps taken before the engagement
  double probability = 0.0;
  int action = 0;
  ContingencyKind kind = ContingencyKind::None;
  int duration = 0;
  int attempts = 0;
  std::string result;
};

/// One arbitration point: either one pilot step, or a whole contingency
/// segment after which control is back with the pilot.
Decision episode_step(contingency::FlightInterface& flight, const policy::Observation& obs, const Pilot& pilot,
                      const CollisionPredictor* predictor, ArbiterState& state,
                      const contingency::PilotConfig& pilot_config, std::vector<EngagementEvent>& events);

}  // namespace hnav::arbiter
