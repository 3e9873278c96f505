#include "hnav/perception/camera.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "hnav/rng.hpp"

namespace hnav::perception {

void CameraModel::validate() const {
  if (!(horizontal_fov > 0.0 && horizontal_fov < std::numbers::pi))
    throw ConfigError("camera horizontal FOV must lie in (0, pi)");
  if (height == 0 || width == 0) throw ConfigError("camera image must be non-empty");
  if (far_clip <= 0.0) throw ConfigError("camera far clip must be positive");
  if (pool_block == 0 || height % pool_block != 0 || width % pool_block != 0)
    throw ConfigError("camera image dimensions must be divisible by the pooling block");
}

double CameraModel::tan_half_h() const { return std::tan(0.5 * horizontal_fov); }

double CameraModel::tan_half_v() const {
  return tan_half_h() * static_cast<double>(height) / static_cast<double>(width);
}

double CameraModel::vertical_fov() const { return 2.0 * std::atan(tan_half_v()); }

Scene make_scene(const sim::CourseConfig& course, std::span<const sim::ObstacleBox> obstacles,
                 bool side_walls) {
  Scene s;
  s.obstacles.assign(obstacles.begin(), obstacles.end());
  s.color_seed = course.seed;
  if (side_walls) {
    const double hw = course.half_width;
    s.walls.push_back({{-10.0, hw}, {course.length + 50.0, hw}});
    s.walls.push_back({{-10.0, -hw}, {course.length + 50.0, -hw}});
  }
  return s;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BoxHit {
  double t = kInf;
  Vec2 normal;  // world-frame outward normal of the entry face
};

BoxHit intersect_box(Vec2 origin, Vec2 dir, const sim::ObstacleBox& box) {
  const Vec2 o = box.to_local(origin);
  const Vec2 d = rotate(dir, -box.yaw);
  const double lo[2] = {-box.half_depth, -box.half_width};
  const double hi[2] = {box.half_depth, box.half_width};
  const double oc[2] = {o.x, o.y};
  const double dc[2] = {d.x, d.y};
  double t0 = -kInf;
  double t1 = kInf;
  int entry_axis = -1;
  for (int a = 0; a < 2; ++a) {
    if (std::abs(dc[a]) < 1e-14) {
      if (oc[a] < lo[a] || oc[a] > hi[a]) return {};
      continue;
    }
    double ta = (lo[a] - oc[a]) / dc[a];
    double tb = (hi[a] - oc[a]) / dc[a];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      entry_axis = a;
    }
    t1 = std::min(t1, tb);
  }
  if (t1 < std::max(t0, 0.0)) return {};
  BoxHit hit;
  hit.t = std::max(t0, 0.0);
  Vec2 n_local{0.0, 0.0};
  if (entry_axis == 0) n_local.x = dc[0] > 0 ? -1.0 : 1.0;
  if (entry_axis == 1) n_local.y = dc[1] > 0 ? -1.0 : 1.0;
  hit.normal = rotate(n_local, box.yaw);
  return hit;
}

double intersect_wall(Vec2 origin, Vec2 dir, const Wall& w) {
  const Vec2 e = w.b - w.a;
  const double denom = dir.x * e.y - dir.y * e.x;
  if (std::abs(denom) < 1e-14) return kInf;
  const Vec2 ao = w.a - origin;
  const double t = (ao.x * e.y - ao.y * e.x) / denom;
  const double s = (ao.x * dir.y - ao.y * dir.x) / denom;
  if (t < 0.0 || s < 0.0 || s > 1.0) return kInf;
  return t;
}

constexpr std::array<std::array<double, 3>, 8> kPalette = {{
    {0.80, 0.10, 0.10}, {0.10, 0.25, 0.75}, {0.92, 0.92, 0.90}, {0.12, 0.12, 0.14},
    {0.65, 0.67, 0.70}, {0.10, 0.55, 0.25}, {0.95, 0.75, 0.10}, {0.55, 0.20, 0.60},
}};
constexpr std::array<double, 3> kSky = {0.55, 0.72, 0.92};
constexpr std::array<double, 3> kGround = {0.33, 0.31, 0.28};
constexpr std::array<double, 3> kWall = {0.62, 0.58, 0.52};
constexpr std::array<double, 3> kHaze = {0.70, 0.75, 0.80};
constexpr double kHazeRange = 40.0;

void shade_pixel(RgbImage& img, std::size_t r, std::size_t c, const std::array<double, 3>& base,
                 double shade, double t) {
  const double f = std::exp(-t / kHazeRange);
  for (std::size_t ch = 0; ch < 3; ++ch)
    img.at(r, c, ch) = std::clamp(base[ch] * shade * f + kHaze[ch] * (1.0 - f), 0.0, 1.0);
}

}  // namespace

RenderedView render_view(const Pose& pose, const Scene& scene, const CameraModel& camera,
                         bool want_rgb) {
  camera.validate();
  const std::size_t H = camera.height;
  const std::size_t W = camera.width;
  RenderedView view;
  view.depth = DepthMap(H, W, camera.far_clip, Resolution::Full, DepthUnits::Meters);
  if (want_rgb) {
    view.rgb.height = H;
    view.rgb.width = W;
    view.rgb.data.assign(H * W * 3, 0.0);
    view.labels.assign(H * W, static_cast<std::int16_t>(PixelClass::Sky));
  }
  const double th = camera.tan_half_h();
  const double tv = camera.tan_half_v();
  const Vec2 origin{pose.x, pose.y};
  const std::size_t nbox = scene.obstacles.size();
  std::vector<BoxHit> hits(nbox);
  std::vector<std::array<double, 3>> colors(nbox);
  for (std::size_t i = 0; i < nbox; ++i)
    colors[i] = kPalette[splitmix64(scene.color_seed ^ (0x9e37ull * (i + 1))) % kPalette.size()];

  for (std::size_t c = 0; c < W; ++c) {
    const double u = th * (0.5 * static_cast<double>(W) - (static_cast<double>(c) + 0.5)) /
                     (0.5 * static_cast<double>(W));
    const double inv_len = 1.0 / std::sqrt(1.0 + u * u);
    const Vec2 dir = rotate({inv_len, u * inv_len}, pose.yaw);
    for (std::size_t i = 0; i < nbox; ++i) hits[i] = intersect_box(origin, dir, scene.obstacles[i]);
    double wall_t = kInf;
    for (const Wall& w : scene.walls) wall_t = std::min(wall_t, intersect_wall(origin, dir, w));

    for (std::size_t r = 0; r < H; ++r) {
      const double v = tv * (0.5 * static_cast<double>(H) - (static_cast<double>(r) + 0.5)) /
                       (0.5 * static_cast<double>(H));
      const double slope = v * inv_len;  // height change per horizontal meter
      double best = kInf;
      int best_box = -1;
      for (std::size_t i = 0; i < nbox; ++i) {
        const double t = hits[i].t;
        if (t >= best) continue;
        const double z = camera.altitude + slope * t;
        if (z >= 0.0 && z <= scene.obstacles[i].height) {
          best = t;
          best_box = static_cast<int>(i);
        }
      }
      const double ground_t = slope < 0.0 ? camera.altitude / -slope : kInf;
      double depth = std::min(best, wall_t);
      if (scene.ground_in_depth) depth = std::min(depth, ground_t);
      view.depth.at(r, c) = std::min(depth, camera.far_clip);

      if (!want_rgb) continue;
      const double ground_rgb = scene.ground_in_rgb ? ground_t : kInf;
      const double nearest = std::min({best, wall_t, ground_rgb});
      auto& label = view.labels[r * W + c];
      if (nearest >= camera.far_clip) {
        label = static_cast<std::int16_t>(PixelClass::Sky);
        for (std::size_t ch = 0; ch < 3; ++ch) view.rgb.at(r, c, ch) = kSky[ch];
      } else if (best_box >= 0 && best == nearest) {
        label = static_cast<std::int16_t>(best_box);
        const double shade = 0.55 + 0.45 * std::abs(hits[static_cast<std::size_t>(best_box)].normal.dot(dir));
        shade_pixel(view.rgb, r, c, colors[static_cast<std::size_t>(best_box)], shade, best);
      } else if (wall_t == nearest) {
        label = static_cast<std::int16_t>(PixelClass::Wall);
        shade_pixel(view.rgb, r, c, kWall, 1.0, wall_t);
      } else {
        label = static_cast<std::int16_t>(PixelClass::Ground);
        shade_pixel(view.rgb, r, c, kGround, 1.0, ground_t);
      }
    }
  }
  return view;
}

DepthMap render_depth_full(const Pose& pose, const Scene& scene, const CameraModel& camera) {
  return render_view(pose, scene, camera, false).depth;
}

RgbImage render_rgb(const Pose& pose, const Scene& scene, const CameraModel& camera) {
  return render_view(pose, scene, camera, true).rgb;
}

DepthMap min_pool(const DepthMap& full, std::size_t block) {
  if (block == 0 || full.rows % block != 0 || full.cols % block != 0)
    throw ConfigError("min_pool: map " + std::to_string(full.rows) + "x" + std::to_string(full.cols) +
                      " is not divisible by block " + std::to_string(block));
  DepthMap out(full.rows / block, full.cols / block, std::numeric_limits<double>::infinity(),
               Resolution::Reduced, full.units);
  for (std::size_t r = 0; r < full.rows; ++r) {
    const std::size_t orow = r / block;
    for (std::size_t c = 0; c < full.cols; ++c) {
      double& cell = out.values[orow * out.cols + c / block];
      cell = std::min(cell, full.values[r * full.cols + c]);
    }
  }
  return out;
}

DepthMap normalize(const DepthMap& meters, double far_clip) {
  if (meters.units != DepthUnits::Meters) throw DataError("normalize expects a map in meters");
  DepthMap out = meters;
  out.units = DepthUnits::Normalized;
  for (double& v : out.values) {
    if (!(v >= 0.0 && v <= far_clip)) throw DataError("depth value outside [0, far clip]");
    v = 2.0 * v / far_clip - 1.0;
  }
  return out;
}

DepthMap denormalize(const DepthMap& normalized, double far_clip) {
  if (normalized.units != DepthUnits::Normalized) throw DataError("denormalize expects a normalized map");
  DepthMap out = normalized;
  out.units = DepthUnits::Meters;
  for (double& v : out.values) {
    if (!(v >= -1.0 && v <= 1.0)) throw DataError("normalized depth outside [-1, 1]");
    v = (v + 1.0) * 0.5 * far_clip;
  }
  return out;
}

DepthMap apply_depth_noise(const DepthMap& normalized, double sigma, std::uint64_t seed) {
  if (normalized.units != DepthUnits::Normalized) throw DataError("depth noise applies to normalized maps");
  DepthMap out = normalized;
  if (sigma <= 0.0) return out;
  Rng rng(seed);
  for (double& v : out.values) v = std::clamp(v + sigma * rng.normal(), -1.0, 1.0);
  return out;
}

}  // namespace hnav::perception
