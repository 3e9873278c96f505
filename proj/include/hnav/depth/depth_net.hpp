#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "hnav/nn/model.hpp"
#include "hnav/perception/camera.hpp"
#include "hnav/perception/dataset.hpp"

namespace hnav::depth {

struct ConvSpec {
  std::size_t kernel;
  int stride;
  std::size_t channels;
};

/// Kernel / stride / output channels, input layer first. The four stride-2
/// layers take the image down to 1/16 scale.
inline constexpr std::array<ConvSpec, 7> kDepthLadder = {{
    {5, 2, 32}, {5, 2, 64}, {3, 2, 128}, {3, 2, 256}, {3, 1, 128}, {3, 1, 32}, {3, 1, 1},
}};

struct DepthNetConfig {
  std::size_t height = 144;
  std::size_t width = 256;
  int sequence_length = 1;  // only single-image input is supported
  double huber_delta = 1.0;
  /// Multiplies every hidden channel count (tests use 1/8 scale).
  double channel_scale = 1.0;
  double leak = nn::kDefaultLeak;

  void validate() const;
  std::size_t out_rows() const { return (height + 15) / 16; }
  std::size_t out_cols() const { return (width + 15) / 16; }
};

class DepthNet : public nn::Model {
 public:
  explicit DepthNet(const DepthNetConfig& config = {}, std::uint64_t seed = 0);
  /// Wraps loaded parameters; throws ConfigError if they do not follow the ladder.
  DepthNet(const DepthNetConfig& config, nn::NetworkParams params);

  /// H x W x 3 normalized image -> (H/16) x (W/16) x 1.
  nn::Tensor forward(const nn::Tensor& image) const;

  nn::NetworkParams& params() override { return params_; }
  const nn::NetworkParams& params() const override { return params_; }
  std::vector<double> accumulate_gradients(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                                           std::optional<std::uint64_t> noise_seed) override;
  std::vector<double> losses(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                             std::optional<std::uint64_t> noise_seed) const override;

  const DepthNetConfig& config() const { return config_; }

 private:
  void check_ladder() const;

  DepthNetConfig config_;
  nn::NetworkParams params_;
};

/// RGB in [0,1] -> tensor in [-1,1].
nn::Tensor image_tensor(const perception::RgbImage& image);
nn::Tensor image_tensor(const std::vector<std::uint8_t>& quantized, std::size_t height, std::size_t width);

struct DepthPrediction {
  perception::DepthMap map;  // reduced, normalized
  std::uint64_t image_id = 0;
};

DepthPrediction predict(const perception::RgbImage& image, const DepthNet& net, std::uint64_t image_id = 0);

/// Mean over cells of the Huber penalty on (pred - target).
double huber_loss(const perception::DepthMap& pred, const perception::DepthMap& target, double delta = 1.0);

struct DepthSchedule {
  std::size_t batch_size = 16;
  std::size_t epochs = 12;
  nn::AdamConfig adam{};
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
};

struct DepthEpochLog {
  std::size_t epoch = 0;
  double train_huber = 0.0;
  double val_huber = 0.0;
  double val_mae = 0.0;
  double val_mse = 0.0;
  double val_rmsle = 0.0;
};

struct MetricStat {
  double mean = 0.0;
  double std_error = 0.0;
};

struct DepthMetrics {
  MetricStat mae;
  MetricStat mse;
  MetricStat rmsle;
  MetricStat huber;
  std::size_t count = 0;
};

struct DepthSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

DepthSplit split_dataset(std::size_t count, double train_fraction, std::uint64_t seed);

/// Per-image metrics averaged over images with standard errors. RMSLE uses
/// log(2 - y); predictions are clamped to [-1, 1] for that metric only.
DepthMetrics depth_metrics(std::span<const perception::DepthMap> predictions,
                           std::span<const perception::DepthMap> targets, double delta = 1.0);

DepthMetrics validate_depth(const DepthNet& net, const perception::DepthDataset& data,
                            std::span<const std::size_t> indices);

using EpochCallback = std::function<void(const DepthEpochLog&)>;

std::vector<DepthEpochLog> train_depth(const perception::DepthDataset& data, DepthNet& net,
                                       const DepthSchedule& schedule, const EpochCallback& on_epoch = {});

void write_depth_log_csv(const std::vector<DepthEpochLog>& log, const std::filesystem::path& path);

}  // namespace hnav::depth
