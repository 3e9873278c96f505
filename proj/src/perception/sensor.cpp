#include "hnav/perception/sensor.hpp"

namespace hnav::perception {

OracleDepthSensor::OracleDepthSensor(const CameraModel& camera, double sigma) : camera_(camera), sigma_(sigma) {
  camera_.validate();
  if (sigma_ < 0.0) throw ConfigError("depth noise sigma must be non-negative");
}

DepthMap reduced_truth(const Pose& pose, const Scene& scene, const CameraModel& camera) {
  return min_pool(render_depth_full(pose, scene, camera), camera.pool_block);
}

DepthMap OracleDepthSensor::sense(const Pose& pose, const Scene& scene, std::uint64_t seed) const {
  const DepthMap clean = normalize(reduced_truth(pose, scene, camera_), camera_.far_clip);
  return apply_depth_noise(clean, sigma_, seed);
}

}  // namespace hnav::perception
