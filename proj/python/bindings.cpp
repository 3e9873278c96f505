// Python bindings: simulator, perception, planner and the evaluation entry
// points. Configs cross the boundary as JSON text.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "hnav/harness/gradcheck.hpp"
#include "hnav/harness/pipeline.hpp"

namespace py = pybind11;
using namespace hnav;
using namespace hnav::harness;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

HarnessConfig parse(const std::string& json) { return json.empty() ? HarnessConfig{} : config_from_json(json); }

perception::DepthMap to_map(const Array& a, perception::DepthUnits units) {
  if (a.ndim() != 2) throw ConfigError("expected a 2-d depth array");
  perception::DepthMap m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), 0.0,
                         perception::Resolution::Full, units);
  std::copy(a.data(), a.data() + a.size(), m.values.begin());
  return m;
}

Array from_map(const perception::DepthMap& m) {
  Array out({m.rows, m.cols});
  std::copy(m.values.begin(), m.values.end(), out.mutable_data());
  return out;
}

sim::Action parse_action(const py::object& a) {
  if (py::isinstance<py::int_>(a)) {
    const int i = a.cast<int>();
    if (i < 0 || i >= sim::kActionCount) throw ConfigError("action index out of range");
    return static_cast<sim::Action>(i);
  }
  const auto name = a.cast<std::string>();
  for (int i = 0; i < sim::kActionCount; ++i)
    if (sim::action_name(static_cast<sim::Action>(i)) == name) return static_cast<sim::Action>(i);
  throw ConfigError("unknown action: " + name);
}

py::dict state_dict(const sim::VehicleState& s) {
  py::dict d;
  d["x"] = s.position.x;
  d["y"] = s.position.y;
  d["vx"] = s.velocity.x;
  d["vy"] = s.velocity.y;
  d["yaw"] = s.yaw;
  d["yaw_rate"] = s.yaw_rate;
  return d;
}

struct PyWorld {
  PyWorld(std::uint64_t seed, const std::string& config_json) : config(parse(config_json)) {
    config.course.seed = seed;
    boxes = sim::generate_course(config.course);
    world.emplace(config.course, boxes, config.dynamics);
    scene = perception::make_scene(config.course, boxes, config.side_walls);
  }
  std::string step(const py::object& action) {
    const auto& o = world->step(sim::apply_action(parse_action(action), world->state(), world->dynamics()));
    return std::string(sim::outcome_name(o.classification));
  }
  Array depth() const {
    return from_map(perception::reduced_truth(perception::pose_of(world->state()), scene, config.camera));
  }
  HarnessConfig config;
  std::vector<sim::ObstacleBox> boxes;
  std::optional<sim::World> world;
  perception::Scene scene;
};

std::string evaluate(const std::string& controller, std::size_t episodes, std::uint64_t seed,
                     const std::string& config_json, std::size_t workers) {
  const HarnessConfig cfg = parse(config_json);
  const ControllerKind kind = controller_from_name(controller);
  const std::vector<ControllerKind> kinds = {kind};
  const LoadedNetworks nets = load_networks(cfg, kinds);
  const auto sensor = make_sensor(cfg, nets);
  const EvaluationRun run = run_evaluation(kind, episodes, seed, cfg, nets.controllers(), *sensor, workers);
  return report_to_json(run.report);
}

std::string episode(const std::string& controller, std::uint64_t seed, const std::string& config_json) {
  const HarnessConfig cfg = parse(config_json);
  const ControllerKind kind = controller_from_name(controller);
  const std::vector<ControllerKind> kinds = {kind};
  const LoadedNetworks nets = load_networks(cfg, kinds);
  const auto sensor = make_sensor(cfg, nets);
  return record_to_json(run_episode(kind, seed, cfg, nets.controllers(), *sensor));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "hybrid monocular-vision collision avoidance: simulator, planners and evaluation";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ArtifactError>(m, "ArtifactError", PyExc_FileNotFoundError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def("default_config", [] { return config_to_json(HarnessConfig{}); }, "Default harness config as JSON text.");
  m.def(
      "config_hash", [](const std::string& json) { return config_hash(parse(json)); }, py::arg("config_json") = "");
  m.def(
      "normalize_config", [](const std::string& json) { return config_to_json(parse(json)); }, py::arg("config_json"),
      "Validate a config and return it with every key filled in.");

  m.def(
      "min_pool",
      [](const Array& a, std::size_t block) {
        return from_map(perception::min_pool(to_map(a, perception::DepthUnits::Meters), block));
      },
      py::arg("depth"), py::arg("block") = 16);
  m.def(
      "normalize_depth",
      [](const Array& a, double far) { return from_map(perception::normalize(to_map(a, perception::DepthUnits::Meters), far)); },
      py::arg("depth"), py::arg("far_clip") = 100.0);
  m.def(
      "apply_depth_noise",
      [](const Array& a, double sigma, std::uint64_t seed) {
        return from_map(perception::apply_depth_noise(to_map(a, perception::DepthUnits::Normalized), sigma, seed));
      },
      py::arg("normalized"), py::arg("sigma") = perception::kDefaultDepthNoiseSigma, py::arg("seed") = 0);
  m.def(
      "huber", [](double e, double delta) { return nn::huber(e, delta); }, py::arg("error"), py::arg("delta") = 1.0);

  m.def(
      "generate_course",
      [](std::uint64_t seed, const std::string& json) {
        HarnessConfig cfg = parse(json);
        cfg.course.seed = seed;
        py::list out;
        for (const auto& b : sim::generate_course(cfg.course)) {
          py::dict d;
          d["cx"] = b.cx;
          d["cy"] = b.cy;
          d["half_width"] = b.half_width;
          d["half_depth"] = b.half_depth;
          d["yaw"] = b.yaw;
          d["height"] = b.height;
          out.append(d);
        }
        return out;
      },
      py::arg("seed"), py::arg("config_json") = "");

  m.def(
      "render_depth",
      [](double x, double y, double yaw, std::uint64_t seed, const std::string& json) {
        HarnessConfig cfg = parse(json);
        cfg.course.seed = seed;
        const auto boxes = sim::generate_course(cfg.course);
        const auto scene = perception::make_scene(cfg.course, boxes, cfg.side_walls);
        return from_map(perception::render_depth_full({x, y, yaw}, scene, cfg.camera));
      },
      py::arg("x"), py::arg("y"), py::arg("yaw"), py::arg("course_seed"), py::arg("config_json") = "",
      "Full-resolution horizontal range in meters.");
  m.def(
      "render_rgb",
      [](double x, double y, double yaw, std::uint64_t seed, const std::string& json) {
        HarnessConfig cfg = parse(json);
        cfg.course.seed = seed;
        const auto boxes = sim::generate_course(cfg.course);
        const auto scene = perception::make_scene(cfg.course, boxes, cfg.side_walls);
        const auto img = perception::render_rgb({x, y, yaw}, scene, cfg.camera);
        Array out({img.height, img.width, std::size_t{3}});
        std::copy(img.data.begin(), img.data.end(), out.mutable_data());
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("yaw"), py::arg("course_seed"), py::arg("config_json") = "");

  py::class_<PyWorld>(m, "World")
      .def(py::init<std::uint64_t, const std::string&>(), py::arg("course_seed"), py::arg("config_json") = "")
      .def("step", &PyWorld::step, py::arg("action"), "Apply a discrete action; returns the outcome name.")
      .def("depth", &PyWorld::depth, "Noise-free reduced depth map (meters).")
      .def_property_readonly("state", [](const PyWorld& w) { return state_dict(w.world->state()); })
      .def_property_readonly("running", [](const PyWorld& w) { return w.world->running(); })
      .def_property_readonly("steps", [](const PyWorld& w) { return w.world->outcome().step_index; })
      .def_property_readonly("outcome", [](const PyWorld& w) {
        return std::string(sim::outcome_name(w.world->outcome().classification));
      });

  m.def(
      "astar_plan",
      [](std::tuple<double, double, double> start, const std::vector<std::tuple<double, double, double>>& squares,
         double half_width, double inflation, double step) -> py::object {
        const perception::Pose pose{std::get<0>(start), std::get<1>(start), std::get<2>(start)};
        std::vector<contingency::ObstacleSquare> sq;
        for (const auto& [near, right, side] : squares) {
          contingency::ObstacleSquare s;
          s.near = near;
          s.lateral_right = right;
          s.side = side;
          s.yaw = pose.yaw;
          s.origin = {pose.x, pose.y};
          sq.push_back(s);
        }
        contingency::ArenaOptions opts;
        opts.inflation = inflation;
        opts.step = step;
        const auto r = contingency::astar_plan(contingency::make_arena(pose, std::move(sq), half_width, opts));
        if (!r.path) return py::none();
        py::dict d;
        d["cost"] = r.path->cost;
        py::list wp;
        for (const Vec2& p : r.path->waypoints) wp.append(py::make_tuple(p.x, p.y));
        d["waypoints"] = wp;
        d["expanded"] = r.expanded;
        return d;
      },
      py::arg("start"), py::arg("squares"), py::arg("half_width") = 6.0, py::arg("inflation") = 0.3,
      py::arg("step") = 1.0,
      "Squares are (near, lateral_right, side) in the start heading frame. Returns None when no path exists.");

  m.def("run_episode", &episode, py::arg("controller"), py::arg("seed"), py::arg("config_json") = "",
        py::call_guard<py::gil_scoped_release>(), "One episode with checkpoints from the config; record as JSON.");
  m.def("evaluate", &evaluate, py::arg("controller"), py::arg("episodes"), py::arg("seed"),
        py::arg("config_json") = "", py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>(),
        "Seeded evaluation; report as JSON.");
  m.def(
      "gradcheck",
      [](std::size_t cnn_coordinates) {
        GradcheckOptions o;
        o.cnn_coordinates = cnn_coordinates;
        std::vector<GradcheckCase> cases;
        {
          py::gil_scoped_release release;
          cases = run_gradchecks(o);
        }
        py::list out;
        for (const auto& c : cases) {
          py::dict d;
          d["name"] = c.name;
          d["error"] = c.error;
          d["tolerance"] = c.tolerance;
          d["checked"] = c.checked;
          d["pass"] = c.pass();
          out.append(d);
        }
        return out;
      },
      py::arg("cnn_coordinates") = 4000);
}
