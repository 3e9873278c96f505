#include "hnav/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hnav::harness {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads keys out of one JSON object and complains about leftovers.
class Section {
 public:
  Section(const json& parent, std::string name) : name_(std::move(name)) {
    if (!parent.contains(name_)) return;
    node_ = &parent.at(name_);
    if (!node_->is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      out = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key " + name_ + "." + key + ": " + e.what());
    }
  }

  void get_path(const std::string& key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  void get_degrees(const std::string& key, double& radians) {
    double d = radians * 180.0 / std::numbers::pi;
    get(key, d);
    radians = deg2rad(d);
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, v] : node_->items())
      if (!seen_.count(k)) throw ConfigError("unknown config key " + name_ + "." + k);
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

// Both directions share one key list: `io` either reads into or writes out of `c`.
template <typename Io>
void visit(HarnessConfig& c, Io& io) {
  io.section("course", [&](auto& s) {
    s.get("length", c.course.length);
    s.get("half_width", c.course.half_width);
    s.get("obstacle_count", c.course.obstacle_count);
    s.get("first_x", c.course.first_x);
    s.get("spacing", c.course.spacing);
    s.get("obstacle_width", c.course.obstacle_width);
    s.get("obstacle_depth", c.course.obstacle_depth);
    s.get("obstacle_height", c.course.obstacle_height);
    s.get("side_walls", c.side_walls);
  });
  io.section("dynamics", [&](auto& s) {
    s.get("dt", c.dynamics.dt);
    s.get("tau", c.dynamics.tau);
    s.get("vehicle_radius", c.dynamics.vehicle_radius);
    s.get("max_steps", c.dynamics.max_steps);
    s.get("cruise_speed", c.dynamics.cruise_speed);
    s.get("reverse_speed", c.dynamics.reverse_speed);
    s.get_degrees("turn_angle_deg", c.dynamics.turn_angle);
  });
  io.section("camera", [&](auto& s) {
    s.get_degrees("horizontal_fov_deg", c.camera.horizontal_fov);
    s.get("height", c.camera.height);
    s.get("width", c.camera.width);
    s.get("far_clip", c.camera.far_clip);
    s.get("altitude", c.camera.altitude);
    s.get("pool_block", c.camera.pool_block);
  });
  io.section("noise", [&](auto& s) {
    s.get("depth_sigma", c.depth_sigma);
    s.get("kinematic_sigma", c.kinematic_sigma);
    s.get_enum("depth_source", c.depth_source);
  });
  io.section("policy", [&](auto& s) {
    auto& t = c.policy_train;
    s.get("lambda", t.lambda);
    s.get("gamma", t.gamma);
    s.get("total_steps", t.total_steps);
    s.get("learning_starts", t.learning_starts);
    s.get("batch_size", t.batch_size);
    s.get("replay_capacity", t.replay_capacity);
    s.get("target_sync", t.target_sync);
    s.get("learning_rate", t.adam.learning_rate);
    s.get("clip_norm", t.adam.clip_norm);
    s.get("seed", t.seed);
    s.get("select_every", t.select_every);
    s.get("select_episodes", t.select_episodes);
    s.get("trunk_width", c.policy_net.trunk_width);
    s.get("trunk_layers", c.policy_net.trunk_layers);
    s.get("stream_width", c.policy_net.stream_width);
    s.get("stream_layers", c.policy_net.stream_layers);
    s.get("noisy_sigma0", c.policy_net.sigma0);
  });
  io.section("collision", [&](auto& s) {
    s.get("horizon", c.collision_net.horizon);
    s.get("decision_threshold", c.collision_net.threshold);
    s.get("positive_fraction", c.collision_net.positive_fraction);
    s.get("batches", c.collision_train.batches);
    s.get("batch_size", c.collision_train.batch_size);
    s.get("learning_rate", c.collision_train.adam.learning_rate);
    s.get("validation_fraction", c.collision_train.validation_fraction);
    s.get("validation_batches", c.collision_train.validation_batches);
    s.get("log_every", c.collision_train.log_every);
    s.get("seed", c.collision_train.seed);
    s.get("data_episodes", c.collision_data.episodes);
    s.get("data_min_frames", c.collision_data.min_frames);
    s.get("data_min_positives", c.collision_data.min_positives);
    s.get("data_max_episodes", c.collision_data.max_episodes);
    s.get("data_seed", c.collision_data.seed);
  });
  io.section("depth", [&](auto& s) {
    s.get("channel_scale", c.depth_net.channel_scale);
    s.get("huber_delta", c.depth_net.huber_delta);
    s.get("epochs", c.depth_train.epochs);
    s.get("batch_size", c.depth_train.batch_size);
    s.get("learning_rate", c.depth_train.adam.learning_rate);
    s.get("train_fraction", c.depth_train.train_fraction);
    s.get("seed", c.depth_train.seed);
    s.get("pairs", c.depth_data.pairs);
    s.get("capture_every", c.depth_data.capture_every);
    s.get("data_seed", c.depth_data.seed);
  });
  io.section("arbiter", [&](auto& s) {
    s.get("threshold", c.threshold);
    s.get("cooldown", c.cooldown);
  });
  io.section("contingency", [&](auto& s) {
    s.get("speed", c.pilot.speed);
    s.get("boundary_margin", c.pilot.boundary_margin);
    s.get("step_budget", c.pilot.step_budget);
    s.get("forward_distance", c.pilot.forward_distance);
    s.get("reverse_distance", c.pilot.reverse_distance);
    s.get_degrees("turn_deg", c.pilot.turn);
    s.get("occupancy_threshold", c.pilot.occupancy.threshold);
    s.get("lattice_step", c.pilot.arena.step);
    s.get("min_depth", c.pilot.arena.min_depth);
    s.get("inflation", c.pilot.arena.inflation);
    s.get("fov_constraint", c.pilot.arena.fov_constraint);
  });
  io.section("evaluation", [&](auto& s) {
    s.get("episodes", c.evaluation.episodes);
    s.get("seed", c.evaluation.seed);
  });
  io.section("checkpoints", [&](auto& s) {
    s.get_path("depth_data", c.paths.depth_data);
    s.get_path("collision_data_rl", c.paths.collision_data_rl);
    s.get_path("collision_data_straight", c.paths.collision_data_straight);
    s.get_path("depth_net", c.paths.depth_net);
    s.get_path("policy", c.paths.policy);
    s.get_path("collision_rl", c.paths.collision_rl);
    s.get_path("collision_straight", c.paths.collision_straight);
  });
}

std::string depth_source_name(DepthSource d) { return d == DepthSource::Oracle ? "oracle" : "depth-net"; }

DepthSource depth_source_from(const std::string& s) {
  if (s == "oracle") return DepthSource::Oracle;
  if (s == "depth-net") return DepthSource::DepthNet;
  throw ConfigError("noise.depth_source must be 'oracle' or 'depth-net', got '" + s + "'");
}

struct Reader {
  const json& root;
  template <typename F>
  void section(const std::string& name, F&& f) {
    Section s(root, name);
    Adapter a{s};
    f(a);
    s.finish();
  }
  struct Adapter {
    Section& s;
    template <typename T>
    void get(const std::string& k, T& v) { s.get(k, v); }
    void get_path(const std::string& k, std::filesystem::path& p) { s.get_path(k, p); }
    void get_degrees(const std::string& k, double& r) { s.get_degrees(k, r); }
    void get_enum(const std::string& k, DepthSource& d) {
      std::string name = depth_source_name(d);
      s.get(k, name);
      d = depth_source_from(name);
    }
  };
};

struct Writer {
  ordered_json root;
  template <typename F>
  void section(const std::string& name, F&& f) {
    Adapter a{root[name]};
    f(a);
  }
  struct Adapter {
    ordered_json& node;
    template <typename T>
    void get(const std::string& k, T& v) { node[k] = v; }
    void get_path(const std::string& k, std::filesystem::path& p) { node[k] = p.generic_string(); }
    void get_degrees(const std::string& k, double& r) { node[k] = r * 180.0 / std::numbers::pi; }
    void get_enum(const std::string& k, DepthSource& d) { node[k] = depth_source_name(d); }
  };
};

}  // namespace

void HarnessConfig::validate() const {
  course.validate();
  camera.validate();
  policy_net.validate();
  policy_train.validate();
  collision_net.validate();
  depth_net.validate();
  if (!(depth_sigma >= 0.0) || !(kinematic_sigma >= 0.0)) throw ConfigError("noise sigmas must be non-negative");
  // p* = 1 is allowed so the gate can be switched off entirely
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("arbiter.threshold must lie in (0, 1]");
  if (cooldown < 0) throw ConfigError("arbiter.cooldown must be non-negative");
  if (dynamics.max_steps < 1 || !(dynamics.dt > 0.0) || !(dynamics.tau > 0.0))
    throw ConfigError("dynamics needs dt > 0, tau > 0 and max_steps >= 1");
  if (evaluation.episodes < 1) throw ConfigError("evaluation.episodes must be at least 1");
  if (depth_data.capture_every < 1) throw ConfigError("depth.capture_every must be at least 1");
  if (pilot.step_budget < 1) throw ConfigError("contingency.step_budget must be at least 1");
  if (collision_train.batch_size < 1 || depth_train.batch_size < 1) throw ConfigError("batch sizes must be positive");
}

HarnessConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  static const std::set<std::string> sections = {"course",  "dynamics", "camera",      "noise",      "policy",
                                                 "collision", "depth",  "arbiter", "contingency", "evaluation",
                                                 "checkpoints"};
  for (const auto& [k, v] : root.items())
    if (!sections.count(k)) throw ConfigError("unknown config section '" + k + "'");
  HarnessConfig c;
  Reader r{root};
  visit(c, r);
  c.validate();
  return c;
}

HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const HarnessConfig& config, int indent) {
  HarnessConfig c = config;
  Writer w;
  visit(c, w);
  return w.root.dump(indent);
}

std::uint64_t config_hash(const HarnessConfig& config) { return fnv1a(config_to_json(config, -1)); }

std::filesystem::path output_dir() {
  const char* env = std::getenv("HNAV_OUTPUT_DIR");
  return (env && *env) ? std::filesystem::path(env) : std::filesystem::path("hnav_out");
}

std::filesystem::path resolve(const std::filesystem::path& p) { return p.is_absolute() ? p : output_dir() / p; }

}  // namespace hnav::harness
