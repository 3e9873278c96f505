#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hnav/depth/depth_net.hpp"

using namespace hnav;
using namespace hnav::depth;
using perception::DepthMap;
using perception::DepthUnits;
using perception::Resolution;

namespace {

DepthMap filled(double v) { return DepthMap(9, 16, v, Resolution::Reduced, DepthUnits::Normalized); }

}  // namespace

TEST(DepthNet, OutputIsOneSixteenthScale) {
  DepthNetConfig cfg;
  cfg.channel_scale = 0.125;
  const DepthNet net(cfg, 3);
  const nn::Tensor out = net.forward(nn::Tensor({144, 256, 3}, 0.1));
  EXPECT_EQ(out.shape, (nn::Shape{9, 16, 1}));
  EXPECT_TRUE(out.all_finite());
  EXPECT_EQ(cfg.out_rows(), 9u);
  EXPECT_EQ(cfg.out_cols(), 16u);
}

TEST(DepthNet, RejectsSequences) {
  DepthNetConfig cfg;
  cfg.sequence_length = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(DepthNet, SameSeedSameWeights) {
  DepthNetConfig cfg;
  cfg.channel_scale = 0.125;
  const DepthNet a(cfg, 9), b(cfg, 9), c(cfg, 10);
  const nn::Tensor x({144, 256, 3}, -0.3);
  EXPECT_EQ(a.forward(x), b.forward(x));
  EXPECT_NE(a.forward(x), c.forward(x));
}

TEST(DepthNet, ImageTensorMapsToSymmetricRange) {
  perception::RgbImage img{1, 2, {0.0, 0.5, 1.0, 1.0, 1.0, 0.0}};
  const nn::Tensor t = image_tensor(img);
  EXPECT_EQ(t.data, (std::vector<double>{-1.0, 0.0, 1.0, 1.0, 1.0, -1.0}));
}

TEST(DepthMetrics, ConstantOffset) {
  std::vector<DepthMap> pred, target;
  for (double base : {-0.5, 0.0, 0.3}) {
    target.push_back(filled(base));
    pred.push_back(filled(base + 0.1));
  }
  const DepthMetrics m = depth_metrics(pred, target, 1.0);
  EXPECT_NEAR(m.mae.mean, 0.1, 1e-9);
  EXPECT_NEAR(m.mse.mean, 0.01, 1e-9);
  EXPECT_NEAR(m.huber.mean, 0.005, 1e-9);
  EXPECT_NEAR(m.mae.std_error, 0.0, 1e-9);
  EXPECT_EQ(m.count, 3u);
}

TEST(DepthMetrics, HuberLossValues) {
  EXPECT_NEAR(huber_loss(filled(0.5), filled(0.0), 1.0), 0.125, 1e-9);
  EXPECT_NEAR(huber_loss(filled(2.0), filled(0.0), 1.0), 1.5, 1e-9);
}

TEST(DepthMetrics, RmsleZeroOnPerfectPrediction) {
  std::vector<DepthMap> p{filled(0.7)};
  EXPECT_EQ(depth_metrics(p, p).rmsle.mean, 0.0);
}

TEST(DepthSplit, DisjointCoverAndSeeded) {
  const DepthSplit s = split_dataset(100, 0.9, 4);
  EXPECT_EQ(s.train.size(), 90u);
  EXPECT_EQ(s.validation.size(), 10u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(split_dataset(100, 0.9, 4).validation, s.validation);
  EXPECT_NE(split_dataset(100, 0.9, 5).validation, s.validation);
}
