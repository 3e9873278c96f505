#pragma once

#include <cstdint>

#include "hnav/perception/camera.hpp"

namespace hnav::perception {

/// Produces the reduced, normalized depth map the controllers see.
class DepthSensor {
 public:
  virtual ~DepthSensor() = default;
  virtual DepthMap sense(const Pose& pose, const Scene& scene, std::uint64_t seed) const = 0;
  virtual const CameraModel& camera() const = 0;
};

/// Raycast ground truth, min-pooled and normalized, plus calibrated noise.
class OracleDepthSensor : public DepthSensor {
 public:
  explicit OracleDepthSensor(const CameraModel& camera = {}, double sigma = kDefaultDepthNoiseSigma);
  DepthMap sense(const Pose& pose, const Scene& scene, std::uint64_t seed) const override;
  const CameraModel& camera() const override { return camera_; }
  double sigma() const { return sigma_; }

 private:
  CameraModel camera_;
  double sigma_;
};

/// Noise-free reduced map in meters.
DepthMap reduced_truth(const Pose& pose, const Scene& scene, const CameraModel& camera);

}  // namespace hnav::perception
