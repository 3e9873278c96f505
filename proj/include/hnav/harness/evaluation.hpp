#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hnav/harness/episode.hpp"

namespace hnav::harness {

struct EvaluationReport {
  ControllerKind controller = ControllerKind::RlOnly;
  std::size_t episodes = 0;
  std::uint64_t base_seed = 0;
  std::uint64_t config_hash = 0;

  std::size_t collisions = 0, out_of_bounds = 0, timeouts = 0, completions = 0;
  double collision_rate = 0.0, out_of_bounds_rate = 0.0, timeout_rate = 0.0, completion_rate = 0.0;

  // Collision attribution by the source of the terminal step. The two
  // shares add up to the collision rate. For expert-only the pilot share
  // belongs to the straight-line flier.
  std::size_t contingency_collisions = 0;
  double contingency_collision_share = 0.0;  // per episode
  double rl_collision_share = 0.0;
  std::size_t engagements = 0;
  std::size_t engaged_episodes = 0;
  /// Contingency collisions per engagement; empty when nothing engaged.
  std::optional<double> contingency_collision_per_engagement;
  /// Contingency collisions per episode that engaged at least once.
  std::optional<double> contingency_collision_per_engaged_episode;

  /// Completed episodes only; SE = sample sd / sqrt(n).
  std::size_t completed_count = 0;
  double mean_completed_length = 0.0;
  double completed_length_se = 0.0;

  /// FNV-1a over the ordered per-episode record hashes.
  std::uint64_t episodes_hash = 0;
};

EvaluationReport summarize_records(ControllerKind kind, std::span<const EpisodeRecord> records, std::uint64_t base_seed,
                                   std::uint64_t config_hash);

struct EvaluationRun {
  EvaluationReport report;
  std::vector<EpisodeRecord> records;  // by episode index
};

/// Episodes seeded base_seed + i, spread over `workers` threads. Results are
/// placed by episode index, so the output does not depend on `workers`.
EvaluationRun run_evaluation(ControllerKind kind, std::size_t episodes, std::uint64_t base_seed,
                             const HarnessConfig& config, const Controllers& nets,
                             const perception::DepthSensor& sensor, std::size_t workers = 1);

std::string report_to_json(const EvaluationReport& report, int indent = 2);
std::string reports_to_json(std::span<const EvaluationReport> reports, int indent = 2);

/// Rows are the table metrics, columns the controllers present.
std::string results_table_csv(std::span<const EvaluationReport> reports);
std::string episodes_csv(std::span<const EpisodeRecord> records);

/// Top-down traces of the first `max_episodes` records, colored by control
/// source, with engagement markers.
std::string trajectory_svg(std::span<const EpisodeRecord> records, const HarnessConfig& config,
                           std::size_t max_episodes = 20);
/// Stacked outcome-rate bars per controller.
std::string outcome_svg(std::span<const EvaluationReport> reports);

/// Writes results_table.csv, report.json, outcomes.svg and per controller
/// episodes_<name>.csv and trajectories_<name>.svg. Returns written paths.
std::vector<std::filesystem::path> aggregate_and_emit(std::span<const EvaluationRun> runs, const HarnessConfig& config,
                                                      const std::filesystem::path& dir);

}  // namespace hnav::harness
