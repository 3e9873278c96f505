#include "hnav/nn/layers.hpp"

#include <cmath>

#include "hnav/common.hpp"
#include "hnav/nn/network.hpp"

namespace hnav::nn {

Param::Param(Tensor t) : value(std::move(t)) {
  grad.assign(value.size(), 0.0);
  m.assign(value.size(), 0.0);
  v.assign(value.size(), 0.0);
}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

void Layer::validate() const {
  if (stride < 1) throw ConfigError("layer stride must be >= 1");
  const std::size_t expected = kind == LayerKind::NoisyDense ? 4 : 2;
  if (params.size() != expected) throw ConfigError("layer has wrong number of parameter tensors");
  for (const auto& p : params) {
    if (p.grad.size() != p.value.size() || p.m.size() != p.value.size() ||
        p.v.size() != p.value.size())
      throw ConfigError("gradient/moment buffers do not mirror parameter shape");
  }
  const Tensor& w = params[0].value;
  const Tensor& b = params[1].value;
  if (kind == LayerKind::Conv2d) {
    if (w.rank() != 4 || w.dim(0) != w.dim(1)) throw ConfigError("conv weights must be [k,k,cin,cout]");
    if (b.rank() != 1 || b.dim(0) != w.dim(3)) throw ConfigError("conv bias must be [cout]");
  } else {
    if (w.rank() != 2) throw ConfigError("dense weights must be [out,in]");
    if (b.rank() != 1 || b.dim(0) != w.dim(0)) throw ConfigError("dense bias must be [out]");
    if (kind == LayerKind::NoisyDense) {
      if (params[2].value.shape != w.shape || params[3].value.shape != b.shape)
        throw ConfigError("noise-scale tensors must match mean parameter shapes");
    }
  }
}

std::size_t Layer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

double init_bound(std::size_t fan_in, Activation act) {
  const double fan = static_cast<double>(fan_in);
  return act == Activation::None ? 1.0 / std::sqrt(fan) : std::sqrt(6.0 / fan);
}

}  // namespace

Layer make_conv2d(std::size_t kernel, std::size_t in_channels, std::size_t out_channels, int stride,
                  Activation activation, Rng& rng) {
  Layer l;
  l.kind = LayerKind::Conv2d;
  l.activation = activation;
  l.stride = stride;
  const double bound = init_bound(kernel * kernel * in_channels, activation);
  l.params.emplace_back(uniform_tensor({kernel, kernel, in_channels, out_channels}, bound, rng));
  l.params.emplace_back(Tensor({out_channels}, 0.0));
  l.validate();
  return l;
}

Layer make_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  Layer l;
  l.kind = LayerKind::Dense;
  l.activation = activation;
  l.params.emplace_back(uniform_tensor({out, in}, init_bound(in, activation), rng));
  l.params.emplace_back(Tensor({out}, 0.0));
  l.validate();
  return l;
}

Layer make_noisy_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng,
                       double sigma0) {
  Layer l;
  l.kind = LayerKind::NoisyDense;
  l.activation = activation;
  const double mu_bound = 1.0 / std::sqrt(static_cast<double>(in));
  const double sigma = sigma0 / std::sqrt(static_cast<double>(in));
  l.params.emplace_back(uniform_tensor({out, in}, mu_bound, rng));
  l.params.emplace_back(uniform_tensor({out}, mu_bound, rng));
  l.params.emplace_back(Tensor({out, in}, sigma));
  l.params.emplace_back(Tensor({out}, sigma));
  l.validate();
  return l;
}

double leaky_relu(double x, double alpha) { return x >= 0.0 ? x : alpha * x; }

double activate(double x, Activation act, double leak) {
  switch (act) {
    case Activation::None:
      return x;
    case Activation::LeakyRelu:
      return leaky_relu(x, leak);
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
  }
  return x;
}

double activate_grad(double pre, Activation act, double leak) {
  switch (act) {
    case Activation::None:
      return 1.0;
    case Activation::LeakyRelu:
      return pre >= 0.0 ? 1.0 : leak;
    case Activation::Relu:
      return pre > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

std::size_t conv_output_extent(std::size_t n, int stride) {
  const auto s = static_cast<std::size_t>(stride);
  return (n + s - 1) / s;
}

std::size_t conv_pad_before(std::size_t n, std::size_t kernel, int stride) {
  const std::size_t out = conv_output_extent(n, stride);
  const std::size_t needed = (out - 1) * static_cast<std::size_t>(stride) + kernel;
  const std::size_t total = needed > n ? needed - n : 0;
  return total / 2;
}

Tensor conv2d_forward(const Tensor& input, const Layer& layer) {
  return conv2d_forward_taped(input, layer, nullptr);
}

NoiseSample sample_noise(const Layer& layer, std::uint64_t seed) {
  Rng rng(seed);
  auto f = [](double e) { return e >= 0.0 ? std::sqrt(e) : -std::sqrt(-e); };
  NoiseSample s;
  s.f_in.resize(layer.in_features());
  s.f_out.resize(layer.out_features());
  for (double& v : s.f_in) v = f(rng.normal());
  for (double& v : s.f_out) v = f(rng.normal());
  return s;
}

std::vector<double> dense_forward(std::span<const double> input, const Layer& layer,
                                  std::optional<std::uint64_t> noise_seed) {
  if (layer.kind == LayerKind::Conv2d) throw ConfigError("dense_forward called on a conv layer");
  if (input.size() != layer.in_features()) {
    throw ConfigError("dense input length " + std::to_string(input.size()) + " != " +
                      std::to_string(layer.in_features()));
  }
  Matrix x(1, static_cast<Eigen::Index>(input.size()));
  std::copy(input.begin(), input.end(), x.data());
  std::optional<NoiseSample> noise;
  if (layer.kind == LayerKind::NoisyDense && noise_seed) noise = sample_noise(layer, *noise_seed);
  Matrix y = dense_batch_forward(layer, x, noise ? &*noise : nullptr, nullptr);
  return {y.data(), y.data() + y.size()};
}

}  // namespace hnav::nn
