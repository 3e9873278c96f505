#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "hnav/perception/dataset.hpp"
#include "hnav/perception/sensor.hpp"
#include "hnav/rng.hpp"

using namespace hnav;
using namespace hnav::perception;

namespace {

DepthMap random_map(std::size_t r, std::size_t c, Rng& rng) {
  DepthMap m(r, c, 0.0, Resolution::Full, DepthUnits::Meters);
  for (double& v : m.values) v = rng.uniform(0.0, 100.0);
  return m;
}

double column_u(const CameraModel& cam, std::size_t c) {
  const double w = static_cast<double>(cam.width);
  return cam.tan_half_h() * (0.5 * w - (static_cast<double>(c) + 0.5)) / (0.5 * w);
}

}  // namespace

TEST(MinPool, MatchesBlockMinimum) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const DepthMap m = random_map(144, 256, rng);
    const DepthMap p = min_pool(m, 16);
    ASSERT_EQ(p.rows, 9u);
    ASSERT_EQ(p.cols, 16u);
    EXPECT_EQ(p.resolution, Resolution::Reduced);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 16; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 16 * i; r < 16 * i + 16; ++r)
          for (std::size_t c = 16 * j; c < 16 * j + 16; ++c) best = std::min(best, m.at(r, c));
        ASSERT_EQ(p.at(i, j), best);
      }
  }
}

TEST(MinPool, RejectsIndivisibleShapes) {
  DepthMap m(10, 16, 1.0, Resolution::Full, DepthUnits::Meters);
  EXPECT_THROW(min_pool(m, 16), ConfigError);
}

TEST(Normalize, EndpointsAndRoundTrip) {
  DepthMap m(1, 3, 0.0, Resolution::Reduced, DepthUnits::Meters);
  m.values = {0.0, 50.0, 100.0};
  const DepthMap n = normalize(m, 100.0);
  EXPECT_EQ(n.values, (std::vector<double>{-1.0, 0.0, 1.0}));
  EXPECT_EQ(n.units, DepthUnits::Normalized);
  EXPECT_EQ(denormalize(n, 100.0).values, m.values);
  m.values[0] = 101.0;
  EXPECT_THROW(normalize(m, 100.0), DataError);
  EXPECT_THROW(normalize(n, 100.0), DataError);  // already normalized
}

TEST(Noise, SeededClampedAndZeroSigmaIsIdentity) {
  DepthMap m(9, 16, 0.95, Resolution::Reduced, DepthUnits::Normalized);
  EXPECT_EQ(apply_depth_noise(m, 0.0, 3), m);
  const DepthMap a = apply_depth_noise(m, 0.3, 3);
  EXPECT_EQ(a, apply_depth_noise(m, 0.3, 3));
  EXPECT_NE(a, apply_depth_noise(m, 0.3, 4));
  for (double v : a.values) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Noise, CalibratedToTargetMae) {
  EXPECT_NEAR(sigma_for_mae(0.147), 0.147 * std::sqrt(std::numbers::pi / 2.0), 1e-15);
  // mid-range cells, far enough from +-1 that clamping never bites
  DepthMap m(100, 100, 0.0, Resolution::Reduced, DepthUnits::Normalized);
  double abs_sum = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DepthMap noisy = apply_depth_noise(m, kDefaultDepthNoiseSigma, seed);
    for (double v : noisy.values) abs_sum += std::abs(v), ++n;
  }
  EXPECT_NEAR(abs_sum / n, 0.147, 0.05 * 0.147);
}

TEST(Render, WallAtTenMetersGivesHorizontalRange) {
  CameraModel cam;
  Scene s;
  s.walls.push_back({{10.0, -100.0}, {10.0, 100.0}});
  const DepthMap d = render_depth_full({0.0, 0.0, 0.0}, s, cam);
  for (std::size_t c : {0u, 17u, 128u, 255u}) {
    const double want = 10.0 * std::sqrt(1.0 + column_u(cam, c) * column_u(cam, c));
    for (std::size_t r : {0u, 71u, 143u}) EXPECT_NEAR(d.at(r, c), want, 1e-9);
  }
}

TEST(Render, GroundExcludedFromDepthByDefault) {
  CameraModel cam;
  Scene s;
  const DepthMap d = render_depth_full({0.0, 0.0, 0.0}, s, cam);
  for (double v : d.values) ASSERT_EQ(v, 100.0);
  s.ground_in_depth = true;
  const DepthMap g = render_depth_full({0.0, 0.0, 0.0}, s, cam);
  // bottom row: slope = v / sqrt(1 + u^2); range = altitude / |slope|
  const double v = cam.tan_half_v() * (0.5 * 144.0 - 143.5) / 72.0;
  const double u = column_u(cam, 128);
  EXPECT_NEAR(g.at(143, 128), 0.75 / (-v / std::sqrt(1.0 + u * u)), 1e-9);
  EXPECT_EQ(g.at(0, 128), 100.0);  // sky
}

TEST(Render, BoxFrontFaceAndHeight) {
  CameraModel cam;
  sim::ObstacleBox b;
  b.cx = 11.0;
  b.half_depth = 1.0;  // near face at x = 10
  Scene s;
  s.obstacles.push_back(b);
  const DepthMap d = render_depth_full({0.0, 0.0, 0.0}, s, cam);
  const double u = column_u(cam, 128);
  EXPECT_NEAR(d.at(72, 128), 10.0 * std::sqrt(1.0 + u * u), 1e-9);
  // top row looks over the 1.5 m box
  EXPECT_EQ(d.at(0, 128), 100.0);
  // box spans |y| <= 1 at x = 10: columns near the edge of the image miss it
  EXPECT_EQ(d.at(72, 0), 100.0);
}

TEST(Render, LeftOfTrackAppearsInLowColumns) {
  sim::ObstacleBox b;
  b.cx = 10.0;
  b.cy = 5.0;  // +y is to the left
  Scene s;
  s.obstacles.push_back(b);
  CameraModel cam;
  const DepthMap p = min_pool(render_depth_full({0.0, 0.0, 0.0}, s, cam));
  double left = 100.0, right = 100.0;
  for (std::size_t j = 0; j < 8; ++j) left = std::min(left, p.at(4, j));
  for (std::size_t j = 8; j < 16; ++j) right = std::min(right, p.at(4, j));
  EXPECT_LT(left, 20.0);
  EXPECT_EQ(right, 100.0);
}

TEST(Render, RgbIsDeterministicAndInRange) {
  sim::CourseConfig course;
  course.seed = 5;
  const auto boxes = sim::generate_course(course);
  const Scene s = make_scene(course, boxes, true);
  CameraModel cam;
  const RgbImage a = render_rgb({0.0, 0.5, 0.1}, s, cam);
  EXPECT_EQ(a, render_rgb({0.0, 0.5, 0.1}, s, cam));
  for (double v : a.data) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Sensor, OracleWithoutNoiseIsPooledTruth) {
  sim::CourseConfig course;
  course.seed = 8;
  const auto boxes = sim::generate_course(course);
  const Scene s = make_scene(course, boxes);
  CameraModel cam;
  const Pose pose{5.0, 0.0, 0.0};
  const OracleDepthSensor clean(cam, 0.0);
  const DepthMap m = clean.sense(pose, s, 1);
  EXPECT_EQ(m, normalize(min_pool(render_depth_full(pose, s, cam)), cam.far_clip));
  EXPECT_EQ(reduced_truth(pose, s, cam), min_pool(render_depth_full(pose, s, cam)));
  const OracleDepthSensor noisy(cam);
  EXPECT_EQ(noisy.sense(pose, s, 1), noisy.sense(pose, s, 1));
  EXPECT_NE(noisy.sense(pose, s, 1), noisy.sense(pose, s, 2));
}

TEST(Dataset, SaveLoadRoundTrip) {
  CameraModel cam;
  cam.height = 32;
  cam.width = 48;
  DepthDataset data;
  data.camera = cam;
  data.seed = 77;
  Rng rng(2);
  for (int k = 0; k < 3; ++k) {
    RgbImage img{32, 48, std::vector<double>(32 * 48 * 3)};
    for (double& v : img.data) v = rng.uniform();
    DepthMap t(2, 3, 0.0, Resolution::Reduced, DepthUnits::Normalized);
    for (double& v : t.values) v = rng.uniform(-1.0, 1.0);
    data.add(img, t);
  }
  const auto dir = std::filesystem::temp_directory_path() / "hnav_dataset_test";
  std::filesystem::create_directories(dir);
  save_depth_dataset(data, dir / "pairs");
  const DepthDataset back = load_depth_dataset(dir / "pairs");
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.images, data.images);
  EXPECT_EQ(back.targets, data.targets);
  // quantization error is at most half a level
  const RgbImage img = data.image(0);
  const RgbImage re = dequantize(quantize(img), 32, 48);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(re.data[i], img.data[i], 0.5 / 255.0 + 1e-12);
  std::filesystem::remove_all(dir);
}
