// Command-line front end: data collection, training, evaluation, replay.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hnav/harness/gradcheck.hpp"
#include "hnav/harness/pipeline.hpp"
#include "hnav/nn/checkpoint.hpp"

using namespace hnav;
using namespace hnav::harness;

namespace {

struct Globals {
  std::string config_path;
  std::size_t workers = 1;
};

HarnessConfig config_of(const Globals& g) {
  return g.config_path.empty() ? HarnessConfig{} : load_config(g.config_path);
}

void log(const std::string& msg) { std::cerr << "[hnav] " << msg << std::endl; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ArtifactError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_collect_depth(const Globals& g) {
  const auto cfg = config_of(g);
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = collect_depth_data(cfg, log);
  const auto stem = resolve(cfg.paths.depth_data);
  std::filesystem::create_directories(stem.parent_path());
  perception::save_depth_dataset(data, stem);
  log("wrote " + std::to_string(data.size()) + " pairs to " + stem.string() + " in " +
      std::to_string(seconds_since(t0)) + " s");
  return 0;
}

int cmd_train_depth(const Globals& g) {
  const auto cfg = config_of(g);
  const auto data = perception::load_depth_dataset(resolve(cfg.paths.depth_data));
  depth::DepthNet net(cfg.depth_net, cfg.depth_train.seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = run_depth_training(cfg, data, net, [&](const depth::DepthEpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %zu: train huber %.5f  val huber %.5f  mae %.4f  mse %.5f  rmsle %.4f (%.0f s)",
                  e.epoch, e.train_huber, e.val_huber, e.val_mae, e.val_mse, e.val_rmsle, seconds_since(t0));
    log(buf);
  });
  const auto ckpt = resolve(cfg.paths.depth_net);
  std::filesystem::create_directories(ckpt.parent_path());
  nn::save_params(net.params(), ckpt);
  depth::write_depth_log_csv(out.log, output_dir() / "depth_log.csv");
  log("saved " + ckpt.string());
  return 0;
}

int cmd_train_policy(const Globals& g, bool resume, double lambda, std::size_t steps) {
  auto cfg = config_of(g);
  if (lambda > 0.0) cfg.policy_train.lambda = lambda;
  if (steps > 0) cfg.policy_train.total_steps = steps;
  const auto ckpt = resolve(cfg.paths.policy);
  policy::QNet net = resume ? policy::QNet(cfg.policy_net, nn::load_params(ckpt))
                            : policy::QNet(cfg.policy_net, cfg.policy_train.seed);
  LoadedNetworks nets;
  if (cfg.depth_source == DepthSource::DepthNet) nets = load_networks(cfg, {});
  const auto sensor = make_sensor(cfg, nets);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<policy::PolicySelectionLog> picks;
  const auto logs = run_policy_training(cfg, net, *sensor, [&](const policy::PolicyEpisodeLog& e) {
    if (e.episode % 50 != 0) return;
    char buf[160];
    std::snprintf(buf, sizeof buf, "episode %zu step %zu: return %.1f %s after %d steps (%.0f s)", e.episode,
                  e.total_steps, e.episode_return, std::string(sim::outcome_name(e.outcome)).c_str(), e.steps,
                  seconds_since(t0));
    log(buf);
  }, &picks);
  for (const auto& p : picks) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "held-out at step %zu: %zu/%zu completed, mean x %.1f%s", p.total_steps,
                  p.completions, p.episodes, p.mean_progress, p.best ? " (best so far)" : "");
    log(buf);
  }
  std::filesystem::create_directories(ckpt.parent_path());
  nn::save_params(net.params(), ckpt);
  policy::write_policy_log_csv(logs, output_dir() / (resume ? "policy_log_resume.csv" : "policy_log.csv"));
  log("saved " + ckpt.string());
  return 0;
}

int cmd_collect_collision(const Globals& g, const std::string& generator_name) {
  const auto cfg = config_of(g);
  const auto gen = generator_from_name(generator_name);
  const std::vector<ControllerKind> need =
      gen == CollisionGenerator::RlPolicy ? std::vector{ControllerKind::RlOnly} : std::vector<ControllerKind>{};
  const auto nets = load_networks(cfg, need);
  const auto sensor = make_sensor(cfg, nets);
  const auto data = collect_collision_data(cfg, gen, nets.q ? &*nets.q : nullptr, *sensor, log);
  const auto stem =
      resolve(gen == CollisionGenerator::RlPolicy ? cfg.paths.collision_data_rl : cfg.paths.collision_data_straight);
  std::filesystem::create_directories(stem.parent_path());
  collision::save_collision_dataset(data, stem);
  log("wrote " + std::to_string(data.size()) + " frames (" + std::to_string(data.positives()) + " positive) to " +
      stem.string());
  return 0;
}

int cmd_train_collision(const Globals& g, const std::string& generator_name) {
  const auto cfg = config_of(g);
  const auto gen = generator_from_name(generator_name);
  const bool rl = gen == CollisionGenerator::RlPolicy;
  const auto data = collision::load_collision_dataset(resolve(rl ? cfg.paths.collision_data_rl
                                                                 : cfg.paths.collision_data_straight));
  collision::CollisionNet net(cfg.collision_net, mix_seed(cfg.collision_train.seed, rl ? 1 : 2));
  const auto res = run_collision_training(cfg, data, net, [&](const collision::CollisionLogEntry& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "batch %zu: train CE %.4f  val accuracy %.4f  val CE %.4f", e.batch, e.train_loss,
                  e.val_accuracy, e.val_cross_entropy);
    log(buf);
  });
  const auto ckpt = resolve(rl ? cfg.paths.collision_rl : cfg.paths.collision_straight);
  std::filesystem::create_directories(ckpt.parent_path());
  nn::save_params(net.params(), ckpt);
  write_text(output_dir() / ("collision_report_" + std::string(harness::generator_name(gen)) + ".json"),
             collision::report_json(res.validation) + "\n");
  std::cout << collision::report_json(res.validation) << "\n";
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& controller, std::size_t episodes, std::int64_t seed,
                 bool save_records) {
  auto cfg = config_of(g);
  if (episodes > 0) cfg.evaluation.episodes = episodes;
  if (seed >= 0) cfg.evaluation.seed = static_cast<std::uint64_t>(seed);
  const std::vector<ControllerKind> kinds =
      controller == "all" ? all_controllers() : std::vector<ControllerKind>{controller_from_name(controller)};
  const auto nets = load_networks(cfg, kinds);
  const auto sensor = make_sensor(cfg, nets);
  std::vector<EvaluationRun> runs;
  for (auto k : kinds) {
    const auto t0 = std::chrono::steady_clock::now();
    runs.push_back(run_evaluation(k, cfg.evaluation.episodes, cfg.evaluation.seed, cfg, nets.controllers(), *sensor,
                                  g.workers));
    log(std::string(controller_name(k)) + ": " + std::to_string(cfg.evaluation.episodes) + " episodes in " +
        std::to_string(seconds_since(t0)) + " s");
  }
  const auto dir = output_dir() / "evaluation";
  for (const auto& p : aggregate_and_emit(runs, cfg, dir)) log("wrote " + p.string());
  if (save_records) {
    for (const auto& run : runs)
      for (const auto& r : run.records)
        write_text(dir / "records" / std::string(controller_name(r.controller)) /
                       ("episode_" + std::to_string(r.seed) + ".json"),
                   record_to_json(r));
  }
  std::vector<EvaluationReport> reports;
  for (const auto& r : runs) reports.push_back(r.report);
  std::cout << results_table_csv(reports);
  return 0;
}

int cmd_replay(const Globals& g, const std::string& record_path, const std::string& svg_path) {
  const auto cfg = config_of(g);
  const EpisodeRecord saved = record_from_json(slurp(record_path));
  if (saved.config_hash != config_hash(cfg))
    log("warning: record config hash " + hex64(saved.config_hash) + " differs from the loaded config " +
        hex64(config_hash(cfg)));
  const std::vector<ControllerKind> kinds{saved.controller};
  const auto nets = load_networks(cfg, kinds);
  const auto sensor = make_sensor(cfg, nets);
  EpisodeOptions opt;
  opt.record_observations = !saved.steps.empty() && !saved.steps.front().observation.empty();
  const EpisodeRecord again = run_episode(saved.controller, saved.seed, cfg, nets.controllers(), *sensor, opt);
  const bool match = record_hash(again) == record_hash(saved);
  std::cout << controller_name(saved.controller) << " seed " << saved.seed << ": " << sim::outcome_name(again.outcome)
            << " after " << again.step_count << " steps, " << again.engagements.size() << " engagements; replay "
            << (match ? "matches" : "DIFFERS FROM") << " the record (" << hex64(record_hash(saved)) << ")\n";
  if (!svg_path.empty()) {
    const std::vector<EpisodeRecord> one{saved};
    write_text(svg_path, trajectory_svg(one, cfg, 1));
  }
  return match ? 0 : 1;
}

int cmd_gradcheck(std::size_t cnn_coordinates) {
  GradcheckOptions o;
  o.cnn_coordinates = cnn_coordinates;
  bool ok = true;
  for (const auto& c : run_gradchecks(o)) {
    std::printf("%-34s params %7zu checked %7zu  max rel err %.3e  tol %.0e  %s\n", c.name.c_str(), c.parameters,
                c.checked, c.error, c.tolerance, c.pass() ? "ok" : "FAIL");
    ok &= c.pass();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid UAV navigation: simulator, networks, contingency planners and evaluation"};
  Globals g;
  app.add_option("-c,--config", g.config_path, "JSON config file (defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("-j,--workers", g.workers, "parallel episode workers")->check(CLI::PositiveNumber);
  app.require_subcommand(1);

  auto* collect_depth = app.add_subcommand("collect-depth-data", "render image/depth pairs with the meander pilot");
  auto* train_depth = app.add_subcommand("train-depth", "train the depth network on the collected pairs");

  auto* train_policy = app.add_subcommand("train-policy", "train the noisy dueling Q-network");
  bool resume = false;
  double lambda = 0.0;
  std::size_t steps = 0;
  train_policy->add_flag("--resume", resume, "continue from the policy checkpoint");
  train_policy->add_option("--lambda", lambda, "override the crash penalty");
  train_policy->add_option("--steps", steps, "override the step budget");

  std::string generator = "rl-policy";
  auto* collect_collision =
      app.add_subcommand("collect-collision-data", "fly a pilot without arbitration and label frames");
  collect_collision->add_option("--generator", generator, "rl-policy or straight-line");
  auto* train_collision = app.add_subcommand("train-collision", "train a collision prediction network");
  train_collision->add_option("--generator", generator, "rl-policy or straight-line");

  auto* evaluate = app.add_subcommand("evaluate", "run the evaluation protocol");
  std::string controller = "all";
  std::size_t episodes = 0;
  std::int64_t seed = -1;
  bool save_records = false;
  evaluate->add_option("--controller", controller, "hybrid-expert, hybrid-astar, rl-only, expert-only or all");
  evaluate->add_option("--episodes", episodes, "episode count (default from config)");
  evaluate->add_option("--seed", seed, "base seed (default from config)");
  evaluate->add_flag("--save-records", save_records, "write every episode record as JSON");

  auto* replay = app.add_subcommand("replay", "re-run a saved episode record and compare");
  std::string record_path, svg_path;
  replay->add_option("--record", record_path, "episode record JSON")->required()->check(CLI::ExistingFile);
  replay->add_option("--svg", svg_path, "write a top-down trace of the record");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::size_t cnn_coordinates = 4000;
  gradcheck->add_option("--cnn-coordinates", cnn_coordinates, "coordinates checked on the CNN (0 = all)");

  auto* show_config = app.add_subcommand("show-config", "print the fully resolved config and its hash");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*collect_depth) return cmd_collect_depth(g);
    if (*train_depth) return cmd_train_depth(g);
    if (*train_policy) return cmd_train_policy(g, resume, lambda, steps);
    if (*collect_collision) return cmd_collect_collision(g, generator);
    if (*train_collision) return cmd_train_collision(g, generator);
    if (*evaluate) return cmd_evaluate(g, controller, episodes, seed, save_records);
    if (*replay) return cmd_replay(g, record_path, svg_path);
    if (*gradcheck) return cmd_gradcheck(cnn_coordinates);
    if (*show_config) {
      const auto cfg = config_of(g);
      std::cout << config_to_json(cfg) << "\nconfig hash " << hex64(config_hash(cfg)) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "hnav: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
