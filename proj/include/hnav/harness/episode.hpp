#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hnav/arbiter/arbiter.hpp"
#include "hnav/harness/config.hpp"

namespace hnav::harness {

enum class ControllerKind : std::uint8_t { HybridAStar, HybridExpert, RlOnly, ExpertOnly };

std::string_view controller_name(ControllerKind k);       // "hybrid-astar", ...
std::string_view controller_label(ControllerKind k);      // results-table column label
ControllerKind controller_from_name(std::string_view name);
/// All four in table column order.
const std::vector<ControllerKind>& all_controllers();

struct StepRecord {
  int step_index = 0;  // steps taken once this command was applied
  contingency::ControlSource source = contingency::ControlSource::Rl;
  int action = -1;            // -1 for contingency steps
  double probability = -1.0;  // -1 when the gate was not queried
  sim::VehicleState state;    // after the step; state.command is the issued command
  std::vector<double> observation;  // arbitration-point observation, when recorded
};

struct EpisodeRecord {
  ControllerKind controller = ControllerKind::RlOnly;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<StepRecord> steps;
  std::vector<arbiter::EngagementEvent> engagements;
  sim::Outcome outcome = sim::Outcome::Running;
  int step_count = 0;

  /// Who issued the terminal step.
  contingency::ControlSource terminal_source() const;
};

std::string record_to_json(const EpisodeRecord& record, int indent = -1);
EpisodeRecord record_from_json(const std::string& text);
/// FNV-1a of the compact JSON form.
std::uint64_t record_hash(const EpisodeRecord& record);

/// Networks behind the controllers. Only the ones a controller needs must be set.
struct Controllers {
  const policy::QNet* q = nullptr;
  const collision::CollisionNet* rl_collision = nullptr;
  const collision::CollisionNet* straight_collision = nullptr;
  /// Replaces the collision network of whichever controller runs (tests).
  const arbiter::CollisionPredictor* predictor_override = nullptr;
};

/// Simulator-backed flight: every command becomes one logged world step.
class SimFlight : public contingency::FlightInterface {
 public:
  SimFlight(const sim::CourseConfig& course, const HarnessConfig& config, const perception::DepthSensor& sensor,
            std::uint64_t seed, std::vector<StepRecord>* log);

  void set_source(contingency::ControlSource s) override { source_ = s; }
  void annotate(int action, double probability) override {
    action_ = action;
    probability_ = probability;
  }
  sim::StepOutcome command(const sim::VelocityCommand& cmd) override;
  const sim::VehicleState& state() const override { return world_.state(); }
  bool running() const override { return world_.running(); }
  perception::DepthMap sense() override;
  const sim::CourseConfig& course() const override { return world_.course(); }

  /// Policy observation at the current step (seeded by episode seed and step).
  policy::Observation observe() const;
  /// Attach an observation to the next logged step.
  void stash_observation(const policy::Observation& obs);

  const sim::World& world() const { return world_; }
  const perception::Scene& scene() const { return scene_; }

 private:
  sim::World world_;
  perception::Scene scene_;
  const perception::DepthSensor& sensor_;
  double kinematic_sigma_;
  std::uint64_t seed_;
  std::vector<StepRecord>* log_;
  contingency::ControlSource source_ = contingency::ControlSource::Rl;
  int action_ = -1;
  double probability_ = -1.0;
  std::vector<double> pending_obs_;
};

struct EpisodeOptions {
  bool record_observations = false;
};

/// Fresh course from `seed`, vehicle at the origin, runs to a terminal
/// classification. Throws ArtifactError naming any network the controller
/// needs but was not given.
EpisodeRecord run_episode(ControllerKind kind, std::uint64_t seed, const HarnessConfig& config,
                          const Controllers& nets, const perception::DepthSensor& sensor,
                          const EpisodeOptions& options = {});

/// Observation-free trajectory comparison: positions, commands, sources, actions.
bool same_trajectory(const EpisodeRecord& a, const EpisodeRecord& b);

}  // namespace hnav::harness
