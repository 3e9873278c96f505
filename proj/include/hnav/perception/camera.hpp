#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "hnav/common.hpp"
#include "hnav/sim/world.hpp"

namespace hnav::perception {

/// Forward-looking pinhole camera mounted on the vehicle body x axis.
struct CameraModel {
  double horizontal_fov = std::numbers::pi / 2.0;
  std::size_t height = 144;
  std::size_t width = 256;
  double far_clip = 100.0;
  double altitude = 0.75;
  std::size_t pool_block = 16;

  void validate() const;
  double tan_half_h() const;
  double tan_half_v() const;  // tan(hfov/2) * H / W
  double vertical_fov() const;
  std::size_t reduced_rows() const { return height / pool_block; }
  std::size_t reduced_cols() const { return width / pool_block; }
};

enum class Resolution : std::uint8_t { Full, Reduced };
enum class DepthUnits : std::uint8_t { Meters, Normalized };

/// Row-major range map. Ranges are horizontal distances from the camera.
struct DepthMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  Resolution resolution = Resolution::Full;
  DepthUnits units = DepthUnits::Meters;

  DepthMap() = default;
  DepthMap(std::size_t r, std::size_t c, double fill, Resolution res, DepthUnits u)
      : rows(r), cols(c), values(r * c, fill), resolution(res), units(u) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool operator==(const DepthMap&) const = default;
};

/// H x W x 3 intensities in [0, 1].
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c, std::size_t ch) { return data[(r * width + c) * 3 + ch]; }
  double at(std::size_t r, std::size_t c, std::size_t ch) const { return data[(r * width + c) * 3 + ch]; }
  bool operator==(const RgbImage&) const = default;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

inline Pose pose_of(const sim::VehicleState& s) { return {s.position.x, s.position.y, s.yaw}; }

/// Vertical wall segment of unbounded height.
struct Wall {
  Vec2 a;
  Vec2 b;
};

struct Scene {
  std::vector<sim::ObstacleBox> obstacles;
  std::vector<Wall> walls;
  /// Whether ground-plane returns appear in depth maps. Off by default: at
  /// camera altitude 0.75 m the ground lies within 10 m in the middle rows.
  bool ground_in_depth = false;
  /// Whether the ground plane is drawn in RGB images.
  bool ground_in_rgb = true;
  std::uint64_t color_seed = 0;
};

/// Scene for a course: its obstacles, optional side walls at +-half_width.
Scene make_scene(const sim::CourseConfig& course, std::span<const sim::ObstacleBox> obstacles,
                 bool side_walls = false);

enum class PixelClass : std::int16_t { Sky = -1, Ground = -2, Wall = -3 };

/// Full-resolution render products sharing one raycast.
struct RenderedView {
  DepthMap depth;              // full, meters
  RgbImage rgb;                // flat shaded
  std::vector<std::int16_t> labels;  // obstacle index or a PixelClass value
};

DepthMap render_depth_full(const Pose& pose, const Scene& scene, const CameraModel& camera);
RgbImage render_rgb(const Pose& pose, const Scene& scene, const CameraModel& camera);
RenderedView render_view(const Pose& pose, const Scene& scene, const CameraModel& camera,
                         bool want_rgb);

/// Reduced map: each cell is the minimum of its block x block region.
DepthMap min_pool(const DepthMap& full, std::size_t block = 16);

/// Affine [0, far_clip] -> [-1, 1].
DepthMap normalize(const DepthMap& meters, double far_clip);
DepthMap denormalize(const DepthMap& normalized, double far_clip);

/// Additive per-cell Gaussian noise, clamped to [-1, 1].
DepthMap apply_depth_noise(const DepthMap& normalized, double sigma, std::uint64_t seed);

/// Noise sigma whose unclamped mean absolute error equals `mae`.
inline double sigma_for_mae(double mae) { return mae * std::sqrt(std::numbers::pi / 2.0); }
inline constexpr double kDefaultDepthNoiseSigma = 0.184;

}  // namespace hnav::perception
