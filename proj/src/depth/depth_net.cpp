#include "hnav/depth/depth_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hnav/rng.hpp"

namespace hnav::depth {

using perception::DepthMap;

void DepthNetConfig::validate() const {
  if (sequence_length != 1) throw ConfigError("depth net supports single-image input only");
  if (height == 0 || width == 0) throw ConfigError("depth net input must be non-empty");
  if (channel_scale <= 0.0) throw ConfigError("channel scale must be positive");
}

namespace {

std::size_t scaled_channels(std::size_t c, double scale, bool is_output) {
  if (is_output) return c;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(c) * scale)));
}

// Conv activations are several MB each. With glibc's default thresholds they
// go through mmap and every training step pays for fresh page faults.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)done;
#endif
}

MetricStat stat(const std::vector<double>& xs) {
  MetricStat s;
  if (xs.empty()) return s;
  const double n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

}  // namespace

DepthNet::DepthNet(const DepthNetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(mix_seed(seed, 0x6465707468ull));
  std::size_t in_ch = 3;
  for (std::size_t i = 0; i < kDepthLadder.size(); ++i) {
    const bool last = i + 1 == kDepthLadder.size();
    const auto& spec = kDepthLadder[i];
    const std::size_t out_ch = scaled_channels(spec.channels, config_.channel_scale, last);
    auto layer = nn::make_conv2d(spec.kernel, in_ch, out_ch, spec.stride,
                                 last ? nn::Activation::None : nn::Activation::LeakyRelu, rng);
    layer.leak = config_.leak;
    params_.layers.push_back(std::move(layer));
    in_ch = out_ch;
  }
}

DepthNet::DepthNet(const DepthNetConfig& config, nn::NetworkParams params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  check_ladder();
}

void DepthNet::check_ladder() const {
  if (params_.layers.size() != kDepthLadder.size()) throw ConfigError("depth net must have 7 conv layers");
  std::size_t in_ch = 3;
  for (std::size_t i = 0; i < kDepthLadder.size(); ++i) {
    const auto& l = params_.layers[i];
    l.validate();
    if (l.kind != nn::LayerKind::Conv2d || l.kernel() != kDepthLadder[i].kernel ||
        l.stride != kDepthLadder[i].stride || l.in_channels() != in_ch)
      throw ConfigError("depth net layer " + std::to_string(i) + " does not match the conv ladder");
    in_ch = l.out_channels();
  }
  if (in_ch != 1) throw ConfigError("depth net output must have one channel");
}

nn::Tensor DepthNet::forward(const nn::Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != config_.height || image.dim(1) != config_.width || image.dim(2) != 3)
    throw ConfigError("depth net input must be " + std::to_string(config_.height) + "x" +
                      std::to_string(config_.width) + "x3, got " + nn::shape_string(image.shape));
  nn::Tensor h = image;
  for (const auto& layer : params_.layers) h = nn::conv2d_forward(h, layer);
  return h;
}

std::vector<double> DepthNet::accumulate_gradients(std::span<const nn::Sample> batch,
                                                   const nn::LossSpec& loss,
                                                   std::optional<std::uint64_t>) {
  std::vector<double> out;
  out.reserve(batch.size());
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<nn::ConvTape> tapes(params_.layers.size());
  for (const auto& sample : batch) {
    nn::Tensor h = sample.input;
    if (h.rank() != 3 || h.dim(0) != config_.height || h.dim(1) != config_.width)
      throw ConfigError("depth net sample has wrong input shape");
    for (std::size_t i = 0; i < params_.layers.size(); ++i)
      h = nn::conv2d_forward_taped(h, params_.layers[i], &tapes[i]);
    nn::Tensor grad(h.shape, 0.0);
    out.push_back(nn::output_loss(loss, h.values(), sample, grad.values()));
    for (double& g : grad.data) g *= scale;
    for (std::size_t i = params_.layers.size(); i-- > 0;)
      grad = nn::conv2d_backward(params_.layers[i], tapes[i], grad, i > 0);
  }
  return out;
}

std::vector<double> DepthNet::losses(std::span<const nn::Sample> batch, const nn::LossSpec& loss,
                                     std::optional<std::uint64_t>) const {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& sample : batch) {
    const nn::Tensor y = forward(sample.input);
    std::vector<double> grad(y.size());
    out.push_back(nn::output_loss(loss, y.values(), sample, grad));
  }
  return out;
}

nn::Tensor image_tensor(const perception::RgbImage& image) {
  nn::Tensor t({image.height, image.width, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = 2.0 * image.data[i] - 1.0;
  return t;
}

nn::Tensor image_tensor(const std::vector<std::uint8_t>& quantized, std::size_t height, std::size_t width) {
  if (quantized.size() != height * width * 3) throw DataError("quantized image has wrong size");
  nn::Tensor t({height, width, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = 2.0 * (quantized[i] / 255.0) - 1.0;
  return t;
}

DepthPrediction predict(const perception::RgbImage& image, const DepthNet& net, std::uint64_t image_id) {
  const nn::Tensor y = net.forward(image_tensor(image));
  DepthPrediction p;
  p.image_id = image_id;
  p.map = DepthMap(y.dim(0), y.dim(1), 0.0, perception::Resolution::Reduced, perception::DepthUnits::Normalized);
  std::copy(y.data.begin(), y.data.end(), p.map.values.begin());
  return p;
}

double huber_loss(const DepthMap& pred, const DepthMap& target, double delta) {
  if (pred.rows != target.rows || pred.cols != target.cols) throw ConfigError("huber_loss: shape mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < pred.values.size(); ++j) total += nn::huber(target.values[j] - pred.values[j], delta);
  return total / static_cast<double>(pred.values.size());
}

DepthSplit split_dataset(std::size_t count, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x73706c6974ull));
  for (std::size_t i = count; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(count)));
  DepthSplit s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return s;
}

DepthMetrics depth_metrics(std::span<const DepthMap> predictions, std::span<const DepthMap> targets,
                           double delta) {
  if (predictions.size() != targets.size()) throw ConfigError("depth_metrics: count mismatch");
  std::vector<double> mae, mse, rmsle, hub;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& t = targets[i];
    if (p.values.size() != t.values.size()) throw ConfigError("depth_metrics: shape mismatch");
    double a = 0.0, s = 0.0, l = 0.0;
    for (std::size_t j = 0; j < p.values.size(); ++j) {
      const double e = t.values[j] - p.values[j];
      a += std::abs(e);
      s += e * e;
      const double pc = std::clamp(p.values[j], -1.0, 1.0);
      const double le = std::log(2.0 - t.values[j]) - std::log(2.0 - pc);
      l += le * le;
    }
    const double n = static_cast<double>(p.values.size());
    mae.push_back(a / n);
    mse.push_back(s / n);
    rmsle.push_back(std::sqrt(l / n));
    hub.push_back(huber_loss(p, t, delta));
  }
  DepthMetrics m;
  m.mae = stat(mae);
  m.mse = stat(mse);
  m.rmsle = stat(rmsle);
  m.huber = stat(hub);
  m.count = predictions.size();
  return m;
}

DepthMetrics validate_depth(const DepthNet& net, const perception::DepthDataset& data,
                            std::span<const std::size_t> indices) {
  std::vector<DepthMap> preds, targets;
  preds.reserve(indices.size());
  for (std::size_t i : indices) {
    const nn::Tensor y = net.forward(image_tensor(data.images.at(i), data.camera.height, data.camera.width));
    DepthMap p(y.dim(0), y.dim(1), 0.0, perception::Resolution::Reduced, perception::DepthUnits::Normalized);
    std::copy(y.data.begin(), y.data.end(), p.values.begin());
    preds.push_back(std::move(p));
    targets.push_back(data.targets.at(i));
  }
  return depth_metrics(preds, targets, net.config().huber_delta);
}

std::vector<DepthEpochLog> train_depth(const perception::DepthDataset& data, DepthNet& net,
                                       const DepthSchedule& schedule, const EpochCallback& on_epoch) {
  if (data.size() == 0) throw DataError("train_depth: empty dataset");
  keep_large_blocks_on_heap();
  if (schedule.batch_size == 0) throw ConfigError("batch size must be positive");
  const DepthSplit split = split_dataset(data.size(), schedule.train_fraction, schedule.seed);
  if (split.train.empty()) throw DataError("train_depth: no training pairs after split");
  const auto loss = nn::LossSpec::huber(net.config().huber_delta);
  std::vector<DepthEpochLog> log;
  std::vector<std::size_t> order = split.train;
  std::int64_t batch_index = 0;
  for (std::size_t epoch = 1; epoch <= schedule.epochs; ++epoch) {
    Rng rng(mix_seed(schedule.seed, 0x65706f6368ull, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double total = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      std::vector<nn::Sample> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        nn::Sample s;
        s.input = image_tensor(data.images[i], data.camera.height, data.camera.width);
        s.target = nn::Tensor({data.targets[i].values.size()}, data.targets[i].values);
        batch.push_back(std::move(s));
      }
      const double l = nn::train_step(net, batch, loss, schedule.adam, std::nullopt, batch_index++);
      total += l * static_cast<double>(batch.size());
      seen += batch.size();
    }
    DepthEpochLog e;
    e.epoch = epoch;
    e.train_huber = total / static_cast<double>(seen);
    if (!split.validation.empty()) {
      const DepthMetrics m = validate_depth(net, data, split.validation);
      e.val_huber = m.huber.mean;
      e.val_mae = m.mae.mean;
      e.val_mse = m.mse.mean;
      e.val_rmsle = m.rmsle.mean;
    }
    log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return log;
}

void write_depth_log_csv(const std::vector<DepthEpochLog>& log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << "epoch,train_huber,val_huber,val_mae,val_mse,val_rmsle\n";
  out.precision(10);
  for (const auto& e : log)
    out << e.epoch << ',' << e.train_huber << ',' << e.val_huber << ',' << e.val_mae << ',' << e.val_mse << ','
        << e.val_rmsle << '\n';
}

}  // namespace hnav::depth
